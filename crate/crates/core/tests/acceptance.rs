//! Acceptance run: one PASS/FAIL line per criterion A1-A10.
//!
//! The binary always exits 0 so that a numerically out-of-reach criterion is
//! reported rather than hidden; set `HOROLAB_ACCEPTANCE_STRICT=1` to turn any
//! FAIL into a non-zero exit.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use horolab::conformal::ps_density;
use horolab::flow::{br_measure, br_star_measure, RightShifted, StarMode};
use horolab::fuchsian::{examples, FuchsianGroup};
use horolab::height::{cusp_orbit, invariant_height};
use horolab::lab::{self, ExperimentConfig, ExperimentKind};
use horolab::moebius::{bruhat_compose, bruhat_nau, busemann, hopf, hopf_inverse, hyp_dist, iwasawa, iwasawa_compose, Decomposition};
use horolab::spectral::{constants, kappa_by_quadrature, laplace_check, phi0_at, SpectralParams};
use horolab::{BoundaryPoint, BumpFunction, GroupElement, Iwasawa, PlanePoint, QuadratureSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn random_element(rng: &mut ChaCha8Rng) -> GroupElement {
    let p = Iwasawa { x: rng.gen_range(-5.0..5.0), y: 10f64.powf(rng.gen_range(-1.5..1.5)), theta: rng.gen_range(0.0..PI) };
    iwasawa_compose(&p, Decomposition::Nak)
}

fn random_point(rng: &mut ChaCha8Rng) -> PlanePoint {
    PlanePoint::new(rng.gen_range(-5.0..5.0), 10f64.powf(rng.gen_range(-1.5..1.5))).unwrap()
}

fn a1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = [0.0f64; 5];
    for _ in 0..10_000 {
        let g = random_element(&mut rng);
        let (z, w, v) = (random_point(&mut rng), random_point(&mut rng), random_point(&mut rng));
        let d0 = hyp_dist(&z, &w);
        worst[0] = worst[0].max((hyp_dist(&g.act_plane(&z), &g.act_plane(&w)) - d0).abs() / d0.max(1.0));
        let u = BoundaryPoint::Finite(rng.gen_range(-10.0..10.0));
        let cocycle = busemann(&u, &z, &w) + busemann(&u, &w, &v) - busemann(&u, &z, &v);
        worst[1] = worst[1].max(cocycle.abs());
        let scale = g.max_entry().max(1.0);
        for order in [Decomposition::Nak, Decomposition::Kan] {
            let back = iwasawa_compose(&iwasawa(&g, order), order);
            worst[2] = worst[2].max(back.distance_to(&g) / scale);
        }
        if let Ok(b) = bruhat_nau(&g) {
            worst[3] = worst[3].max(bruhat_compose(&b).distance_to(&g) / scale);
        }
        let back = hopf_inverse(&hopf(&g)).unwrap();
        worst[4] = worst[4].max(back.distance_to(&g) / scale);
    }
    let m = worst.iter().cloned().fold(0.0, f64::max);
    outcome(
        m < 1e-9,
        format!(
            "max deviations: dist {:.1e}, cocycle {:.1e}, iwasawa {:.1e}, bruhat {:.1e}, hopf {:.1e}",
            worst[0], worst[1], worst[2], worst[3], worst[4]
        ),
    )
}

fn a2() -> Outcome {
    let (mut ident, mut quad) = (0.0f64, 0.0f64);
    for d in [0.55, 0.6, 0.75, 0.9] {
        let k0 = constants(&SpectralParams::new(d, 0).unwrap()).unwrap().1;
        for n in -20..=20 {
            let p = SpectralParams::new(d, n).unwrap();
            let (c, k) = constants(&p).unwrap();
            ident = ident.max((k * c * c / k0 - 1.0).abs());
            let q = kappa_by_quadrature(&p, 1e4, 1e-9 * k.abs()).unwrap();
            quad = quad.max((q / k - 1.0).abs());
        }
    }
    outcome(ident < 1e-10 && quad < 1e-6, format!("κc²/κ₀ − 1 ≤ {ident:.1e}, quadrature rel err ≤ {quad:.1e}"))
}

fn a3() -> Outcome {
    let g = FuchsianGroup::build_with_depth(examples::wide(), 8).unwrap();
    let nu = ps_density(&g, 7, 0.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let (mut worst, mut ratio_lo, mut ratio_hi) = (0.0f64, f64::INFINITY, 0.0f64);
    for _ in 0..20 {
        let z = PlanePoint::new(rng.gen_range(-2.0..2.0), rng.gen_range(0.2..3.0)).unwrap();
        let y = z.y();
        let (lhs, rhs) = laplace_check(&nu, &z, 1e-3 * y);
        worst = worst.max(((lhs - rhs) / rhs).abs());
        let (l2, r2) = laplace_check(&nu, &z, 2e-2 * y);
        let (l1, r1) = laplace_check(&nu, &z, 1e-2 * y);
        let ratio = (l2 - r2).abs() / (l1 - r1).abs();
        ratio_lo = ratio_lo.min(ratio);
        ratio_hi = ratio_hi.max(ratio);
    }
    let positive = (0..1000).all(|_| phi0_at(nu.delta(), &random_point(&mut rng), &nu) > 0.0);
    outcome(
        worst < 1e-3 && ratio_lo > 3.5 && ratio_hi < 4.5 && positive,
        format!("rel residual ≤ {worst:.1e}, step-halving ratio in [{ratio_lo:.2}, {ratio_hi:.2}], positive: {positive}"),
    )
}

fn a4() -> Outcome {
    let cfg = ExperimentConfig::defaults(ExperimentKind::Measures);
    let t = lab::run_measures(&cfg).unwrap();
    let slope = t.summary_value("ball_slope").unwrap();
    let range = t.summary_value("shadow_range").unwrap();
    outcome(
        (slope - t.delta).abs() <= 0.05 && range <= 20.0,
        format!("ball slope {slope:.4} vs δ̂ {:.4}, shadow dynamic range {range:.2}", t.delta),
    )
}

fn a5() -> Outcome {
    let cfg = ExperimentConfig::defaults(ExperimentKind::Phi);
    let t = lab::run_phi(&cfg).unwrap();
    let err = t.summary_value("final_rel_err").unwrap();
    let slope = t.summary_value("slope").unwrap();
    let expected = 0.5 - t.delta;
    outcome(
        err <= 0.05 && (slope - expected).abs() <= 0.15,
        format!("δ̂ {:.4}, rel err at T = 1000 {err:.4}, fitted exponent {slope:.3} vs {expected:.3}", t.delta),
    )
}

fn a6() -> Outcome {
    let cfg = ExperimentConfig::defaults(ExperimentKind::Thm1);
    let t = lab::run_thm1(&cfg).unwrap();
    let errs = t.column("rel_err");
    let last = *errs.last().unwrap();
    let decreasing = errs.windows(2).all(|w| w[1] <= w[0]);
    let slope = t.summary_value("slope").unwrap_or(f64::NAN);
    let limit = t.summary_value("limit_rel_err").unwrap();
    outcome(
        last <= 0.05 && decreasing && slope < 0.0,
        format!(
            "δ̂ {:.4}, ratio {:.4} vs BR ratio {:.4} at T = 1000 (rel err {last:.3}, tail-averaged {limit:.3}), decreasing: {decreasing}, exponent {slope:.3}",
            t.delta,
            t.column("ratio").last().unwrap(),
            t.summary_value("br_ratio").unwrap()
        ),
    )
}

fn a7() -> Outcome {
    let cfg = ExperimentConfig::defaults(ExperimentKind::Translate);
    let t = lab::run_translate(&cfg).unwrap();
    let slope = t.summary_value("slope").unwrap();
    let spread = t.summary_value("prefactor_spread").unwrap();
    let expected = 1.0 - t.delta;
    outcome(
        (slope - expected).abs() <= 0.1 && spread <= 0.15,
        format!("δ̂ {:.4}, slope {slope:.4} vs {expected:.4}, prefactor spread {spread:.3}", t.delta),
    )
}

fn a8() -> Outcome {
    let g = FuchsianGroup::build(examples::wide()).unwrap();
    let nu = ps_density(&g, 7, 0.0).unwrap();
    let tol = 1e-7;
    let q = QuadratureSpec::new(tol, 200_000).unwrap();
    let centers = [(0.0, 1.0, 0.3), (0.1, 1.3, 1.2), (-0.1, 0.9, 2.5), (0.0, 2.0, 0.0), (0.05, 1.1, 1.9)];
    let (mut shift_dev, mut mode_dev) = (0.0f64, 0.0f64);
    for (x, y, theta) in centers {
        let f = BumpFunction::new(Iwasawa { x, y, theta }, (0.15, 0.2, 0.4), 4, 1.0).unwrap();
        f.validate(&g).unwrap();
        let base = br_measure(&f, &nu, &q).unwrap().value[0];
        for s in [-0.6, 0.35, 1.0] {
            let moved = br_measure(&RightShifted { inner: &f, s }, &nu, &q).unwrap().value[0];
            shift_dev = shift_dev.max((moved - base).abs());
        }
        let c = f.center_element();
        let hopf = br_star_measure(&f, &nu, StarMode::Hopf, &c, &q).unwrap().value[0];
        let nau = br_star_measure(&f, &nu, StarMode::Nau, &c, &q).unwrap().value[0];
        mode_dev = mode_dev.max((hopf / nau - 1.0).abs());
    }
    outcome(
        shift_dev <= 2.0 * tol && mode_dev <= 0.01,
        format!("N-recentering deviation {shift_dev:.1e} (limit {:.1e}), hopf/nau rel gap {mode_dev:.1e}", 2.0 * tol),
    )
}

fn a9() -> Outcome {
    let cusped = FuchsianGroup::build(examples::cusped()).unwrap();
    let data = cusp_orbit(&cusped, 8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(109);
    let (mut p1, mut p2) = (true, true);
    for _ in 0..1000 {
        let p = Iwasawa { x: rng.gen_range(-0.6..0.6), y: 10f64.powf(rng.gen_range(-2.5..1.5)), theta: rng.gen_range(0.0..PI) };
        let g = iwasawa_compose(&p, Decomposition::Nak);
        let base = data.frame_height(&g);
        let x: f64 = rng.gen_range(-20.0..20.0);
        p1 &= data.frame_height(&(g * GroupElement::n(x))) <= base * (1.0 + x.abs()).powi(2) * (1.0 + 1e-12);
        let y = 10f64.powf(rng.gen_range(-3.0..3.0));
        p2 &= data.frame_height(&(g * GroupElement::a(y))) <= base * y.max(1.0 / y) * (1.0 + 1e-12);
    }
    let d6 = cusp_orbit(&cusped, 6).unwrap();
    let mut overlaps = 0;
    for i in 0..200 {
        for j in 0..200 {
            let x = -0.5 + (i as f64 + 0.5) / 200.0;
            let y = 10f64.powf(-3.0 + 3.5 * (j as f64 + 0.5) / 200.0);
            overlaps += (d6.horoballs_containing(&PlanePoint::new(x, y).unwrap()).len() > 1) as usize;
        }
    }
    let mut exact = true;
    for disks in [examples::symmetric(), examples::thin(), examples::wide()] {
        let g = FuchsianGroup::build(disks).unwrap();
        for _ in 0..300 {
            exact &= invariant_height(&g, &random_point(&mut rng), 8).unwrap() == 1.0;
        }
    }
    outcome(
        p1 && p2 && overlaps == 0 && exact,
        format!("(1) {p1}, (2) {p2}, (4) overlapping grid points {overlaps}, convex cocompact ≡ 1: {exact}"),
    )
}

fn a10() -> Outcome {
    let mut cfg = ExperimentConfig::defaults(ExperimentKind::Measures);
    cfg.depth = 9;
    cfg.seed = 17;
    let body = |c: &ExperimentConfig| lab::csv_body(&lab::to_csv(c, &lab::run(c).unwrap()).unwrap());
    let (a, b) = (body(&cfg), body(&cfg));
    let mut phi = ExperimentConfig::defaults(ExperimentKind::Phi);
    phi.depth = 5;
    phi.grid = vec![2.0, 4.0, 8.0, 16.0];
    let (c, d) = (body(&phi), body(&phi));
    outcome(a == b && c == d, format!("measures body {} bytes, phi body {} bytes, identical: {}", a.len(), c.len(), a == b && c == d))
}

fn main() {
    let criteria: [(&str, &str, fn() -> Outcome, Option<u64>); 10] = [
        ("A1", "geometry kernel", a1, Some(5)),
        ("A2", "constants", a2, Some(30)),
        ("A3", "eigenfunction", a3, None),
        ("A4", "measure growth", a4, Some(180)),
        ("A5", "central experiment", a5, Some(600)),
        ("A6", "horocycle ratios", a6, None),
        ("A7", "translates", a7, None),
        ("A8", "BR and BR* identities", a8, None),
        ("A9", "invariant height", a9, None),
        ("A10", "reproducibility", a10, None),
    ];
    let only: Option<Vec<String>> = std::env::var("HOROLAB_ACCEPTANCE_ONLY").ok().map(|s| s.split(',').map(str::to_string).collect());
    let mut failures = 0;
    for (id, name, run, limit) in criteria {
        if only.as_ref().is_some_and(|o| !o.iter().any(|x| x == id)) {
            continue;
        }
        let t0 = Instant::now();
        let mut o = run();
        let elapsed = t0.elapsed();
        if let Some(l) = limit {
            if elapsed > Duration::from_secs(l) {
                o.pass = false;
                o.detail += &format!("; runtime over the {l} s limit");
            }
        }
        failures += (!o.pass) as usize;
        println!("{id} {} {name}: {} ({:.1} s)", if o.pass { "PASS" } else { "FAIL" }, o.detail, elapsed.as_secs_f64());
    }
    println!("{failures} criteria failed");
    if failures > 0 && std::env::var("HOROLAB_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
