//! Invariants of the core building blocks, checked against closed forms or
//! brute-force recomputation.

use std::sync::Arc;

use coag_core::diagnostics::{test_identity, IdentityVariant};
use coag_core::gauges::{build_gauge_from_tail, check_inequalities, Gauge, TailTable};
use coag_core::kernels::{truncate, Kernel, TruncatedKernel};
use coag_core::operators::{CoagulationOperator, Model, RateOperator};
use coag_core::sizedomain::{make_grid, project, weighted_distance, NumberDensity, SizeGrid, Weight};
use coag_core::testfn::TestFunction;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn kernels() -> Vec<Kernel> {
    vec![
        Kernel::constant(),
        Kernel::singular_product(0.2),
        Kernel::singular_product(0.45),
        Kernel::additive(),
    ]
}

/// Closed form of each built-in family, written out independently.
fn oracle(kernel: &Kernel, mu: f64, nu: f64) -> f64 {
    match kernel.family_name() {
        "constant" => 1.0,
        "singular_product" => (mu * nu).powf(-kernel.sigma),
        "additive" => mu + nu,
        other => panic!("no oracle for {other}"),
    }
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

#[test]
fn kernels_are_symmetric_and_match_closed_forms() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for kernel in kernels() {
        for _ in 0..10_000 {
            let mu = log_uniform(&mut rng, 1e-4, 1e4);
            let nu = log_uniform(&mut rng, 1e-4, 1e4);
            let a = kernel.eval(mu, nu).unwrap();
            let b = kernel.eval(nu, mu).unwrap();
            assert_eq!(a, b, "{} at ({mu}, {nu})", kernel.family_name());
            let want = oracle(&kernel, mu, nu);
            assert!((a - want).abs() <= 1e-13 * want, "{} at ({mu}, {nu}): {a} vs {want}", kernel.family_name());
            assert!(a <= kernel.growth_bound(mu, nu) * (1.0 + 1e-12));
        }
    }
}

#[test]
fn kernels_reject_nonpositive_arguments() {
    let k = Kernel::constant();
    assert!(k.eval(0.0, 1.0).is_err());
    assert!(k.eval(1.0, -2.0).is_err());
    let t = truncate(&k, 10.0).unwrap();
    assert!(t.eval(-1.0, 1.0).is_err());
    assert!(truncate(&k, 1.0).is_err());
}

proptest! {
    #[test]
    fn truncation_masks_outside_the_window(
        which in 0usize..4,
        n in 2.0f64..200.0,
        lmu in -7.0f64..7.0,
        lnu in -7.0f64..7.0,
    ) {
        let kernel = kernels().swap_remove(which);
        let t: TruncatedKernel = truncate(&kernel, n).unwrap();
        let (mu, nu) = (lmu.exp(), lnu.exp());
        let inside = mu > 1.0 / n && mu < n && nu > 1.0 / n && nu < n;
        let v = t.eval(mu, nu).unwrap();
        if inside {
            prop_assert_eq!(v, kernel.eval(mu, nu).unwrap());
            prop_assert!(v <= t.sup_bound() * (1.0 + 1e-12));
        } else {
            prop_assert_eq!(v, 0.0);
        }
        let sup = 2.0 * kernel.k * n.powf(2.0 + 2.0 * kernel.sigma);
        prop_assert!((t.sup_bound() - sup).abs() <= 1e-12 * sup);
    }
}

#[test]
fn grid_cell_count_and_endpoints() {
    for &n in &[1.5, 2.0, 10.0, 37.0, 100.0, 1000.0] {
        for &cpd in &[4usize, 8, 16, 32] {
            let g = make_grid(n, cpd).unwrap();
            // Count by brute force: the smallest integer I with I ≥ 2·cpd·log10(n).
            let target = 2.0 * cpd as f64 * n.log10();
            let mut count = 1usize;
            while (count as f64) < target - 1e-9 {
                count += 1;
            }
            assert_eq!(g.len(), count, "n={n} cpd={cpd}");
            assert_eq!(g.edges()[0], 1.0 / n);
            assert_eq!(*g.edges().last().unwrap(), n);
            let ratio = g.ratio();
            for w in g.edges().windows(2) {
                assert!((w[1] / w[0] - ratio).abs() <= 1e-12 * ratio);
            }
            for (i, c) in g.centers().iter().enumerate() {
                let e = g.edges();
                assert!(e[i] < *c && *c < e[i + 1]);
                assert!((g.widths()[i] - (e[i + 1] - e[i])).abs() <= 1e-15 * e[i + 1]);
            }
        }
    }
    assert!(make_grid(1.0, 16).is_err());
    assert!(make_grid(10.0, 2).is_err());
}

fn random_density(grid: &Arc<SizeGrid>, seed: u64, sparsity: f64) -> NumberDensity {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..grid.len())
        .map(|_| if rng.gen::<f64>() < sparsity { 0.0 } else { rng.gen::<f64>() })
        .collect();
    NumberDensity::from_values(grid.clone(), values, 0.0).unwrap()
}

fn brute_norm(d: &NumberDensity, w: impl Fn(f64) -> f64) -> f64 {
    let g = &d.grid;
    (0..g.len()).map(|i| w(g.centers()[i]) * d.values[i] * g.widths()[i]).sum()
}

proptest! {
    #[test]
    fn weighted_norms_are_linear_and_monotone(seed in any::<u64>(), factor in 0.0f64..50.0, sigma in 0.0f64..0.5) {
        let g = Arc::new(make_grid(20.0, 8).unwrap());
        let a = random_density(&g, seed, 0.3);
        let b = random_density(&g, seed.wrapping_add(1), 0.3);
        for w in [Weight::One, Weight::Mass, Weight::NegSigma(sigma), Weight::YNorm(sigma), Weight::Distance(sigma)] {
            let na = a.weighted_norm(w);
            let want = brute_norm(&a, |x| w.at(x));
            prop_assert!((na - want).abs() <= 1e-12 * want.max(1e-300));
            let scaled = a.clone().scaled(factor).weighted_norm(w);
            prop_assert!((scaled - factor * na).abs() <= 1e-12 * (factor * na).max(1e-300));
            // a ≤ a + b pointwise.
            let sum = NumberDensity::from_values(
                g.clone(),
                a.values.iter().zip(&b.values).map(|(x, y)| x + y).collect(),
                0.0,
            ).unwrap();
            let ns = sum.weighted_norm(w);
            prop_assert!(ns >= na);
            prop_assert!((ns - na - b.weighted_norm(w)).abs() <= 1e-12 * ns);
            let d = weighted_distance(&a, &b, w).unwrap();
            let dd = brute_norm(
                &NumberDensity { grid: g.clone(), values: a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).collect(), time: 0.0 },
                |x| w.at(x),
            );
            prop_assert!((d - dd).abs() <= 1e-12 * dd.max(1e-300));
            prop_assert!(d <= na + b.weighted_norm(w) + 1e-12);
        }
    }

    #[test]
    fn projection_conserves_number(seed in any::<u64>(), cpd_src in 4usize..40, cpd_dst in 4usize..40) {
        let src = Arc::new(make_grid(30.0, cpd_src).unwrap());
        let dst = Arc::new(make_grid(30.0, cpd_dst).unwrap());
        let a = random_density(&src, seed, 0.2);
        let p = project(&a, dst);
        let before: f64 = a.numbers().iter().sum();
        let after: f64 = p.numbers().iter().sum();
        prop_assert!((before - after).abs() <= 1e-12 * before.max(1e-300));
        prop_assert!(p.values.iter().all(|v| *v >= 0.0));
    }
}

#[test]
fn projection_onto_the_same_grid_is_identity() {
    let g = Arc::new(make_grid(50.0, 12).unwrap());
    let a = random_density(&g, 3, 0.1);
    let p = project(&a, g.clone());
    for (x, y) in a.values.iter().zip(&p.values) {
        assert!((x - y).abs() <= 1e-13 * x.abs().max(1.0));
    }
}

fn models() -> Vec<Model> {
    vec![
        Model::Sce,
        Model::Ohs,
        Model::Generalized { eps: 1.0 },
        Model::Generalized { eps: 0.5 },
        Model::Generalized { eps: 0.1 },
        Model::Generalized { eps: 0.01 },
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn operators_balance_mass_and_lose_particles(seed in any::<u64>(), which in 0usize..4, m in 0usize..6) {
        let n = 20.0;
        let g = Arc::new(make_grid(n, 8).unwrap());
        let kernel = truncate(&kernels()[which], n).unwrap();
        let model = models()[m];
        let op = CoagulationOperator::new(g.clone(), &kernel, model).unwrap();
        let a = random_density(&g, seed, 0.3);
        let q = op.eval(&a);
        let mass_rate: f64 = (0..g.len()).map(|i| g.centers()[i] * q.values[i] * g.widths()[i]).sum();
        let scale: f64 = (0..g.len()).map(|i| g.centers()[i] * q.values[i].abs() * g.widths()[i]).sum::<f64>();
        prop_assert!(q.outflux_rate >= 0.0);
        prop_assert!((mass_rate + q.outflux_rate).abs() <= 1e-11 * scale.max(1e-300),
            "{}: mass rate {mass_rate}, outflux {}", model.name(), q.outflux_rate);
        // A coagulation never creates particles: two merge into at most one.
        let number_rate: f64 = (0..g.len()).map(|i| q.values[i] * g.widths()[i]).sum();
        prop_assert!(number_rate <= 1e-12 * scale.max(1e-300));
        // Empty cells can only fill.
        for i in 0..g.len() {
            if a.values[i] == 0.0 {
                prop_assert!(q.values[i] >= -1e-14 * scale.max(1e-300));
            }
        }
    }

    #[test]
    fn generalized_operator_is_locally_lipschitz(seed in any::<u64>(), which in 0usize..4, eps in 0.01f64..1.0) {
        let n = 10.0;
        let g = Arc::new(make_grid(n, 6).unwrap());
        let kernel = truncate(&kernels()[which], n).unwrap();
        let op = CoagulationOperator::new(g.clone(), &kernel, Model::Generalized { eps }).unwrap();
        let a = random_density(&g, seed, 0.2);
        let b = random_density(&g, seed ^ 0x5555, 0.2);
        let (qa, qb) = (op.eval(&a), op.eval(&b));
        let l1 = |v: &[f64]| -> f64 { v.iter().zip(g.widths()).map(|(x, w)| x.abs() * w).sum() };
        let diff_q: Vec<f64> = qa.values.iter().zip(&qb.values).map(|(x, y)| x - y).collect();
        let diff: Vec<f64> = a.values.iter().zip(&b.values).map(|(x, y)| x - y).collect();
        let bound = kernel.sup_bound() * (1.0 / eps + 2.0) * (l1(&a.values) + l1(&b.values)) * l1(&diff);
        prop_assert!(l1(&diff_q) <= bound, "{} > {bound}", l1(&diff_q));
    }
}

#[test]
fn collision_identities_vanish_for_the_mass() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10_000 {
        let nu = log_uniform(&mut rng, 1e-3, 1e3);
        let tau = log_uniform(&mut rng, 1e-3, 1e3);
        let eps = rng.gen_range(1e-3..=1.0);
        let scale = nu + tau;
        for variant in [
            IdentityVariant::Omega1,
            IdentityVariant::OmegaTilde,
            IdentityVariant::OmegaEps { eps },
            IdentityVariant::Omega2Eps { eps },
        ] {
            let r = test_identity(&TestFunction::Linear, variant, nu, tau).unwrap();
            assert!(r.abs() <= 1e-12 * scale, "{variant:?} at ({nu}, {tau}): {r}");
        }
        // For ω ≡ 1 the binary identity counts one lost particle per event.
        let r = test_identity(&TestFunction::Constant { value: 1.0 }, IdentityVariant::OmegaTilde, nu, tau).unwrap();
        assert_eq!(r, -1.0);
    }
}

fn random_tail(seed: u64) -> TailTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = rng.gen_range(3..60);
    let mut r = vec![0.0];
    for _ in 1..len {
        let last = *r.last().unwrap();
        r.push(last + log_uniform(&mut rng, 1e-3, 10.0));
    }
    let mut tail = vec![rng.gen_range(0.1..5.0)];
    for _ in 1..len - 1 {
        let last = *tail.last().unwrap();
        tail.push(last * rng.gen_range(0.0..1.0));
    }
    tail.push(0.0);
    TailTable::new(r, tail).unwrap()
}

proptest! {
    #[test]
    fn gauges_from_tails_are_convex_with_concave_slope(seed in any::<u64>()) {
        let tail = random_tail(seed);
        let gauge = build_gauge_from_tail(&tail).unwrap();
        prop_assert_eq!(gauge.psi(0.0), 0.0);
        let bp = gauge.breakpoints();
        let top = *bp.last().unwrap() * 2.0;
        let samples: Vec<f64> = (0..=400).map(|k| top * k as f64 / 400.0).collect();
        let d: Vec<f64> = samples.iter().map(|s| gauge.dpsi(*s)).collect();
        for w in d.windows(3) {
            // Ψ' nondecreasing and concave on a uniform lattice.
            prop_assert!(w[1] >= w[0] - 1e-12 * w[1].abs());
            prop_assert!(w[2] - w[1] <= w[1] - w[0] + 1e-9 * w[2].abs().max(1.0));
        }
        // Ψ' is piecewise linear, so the trapezoid rule on the breakpoints is exact.
        for s in samples.iter().step_by(40).skip(1) {
            let mut nodes: Vec<f64> = bp.iter().copied().filter(|r| r < s).collect();
            nodes.push(*s);
            let integral: f64 = nodes.windows(2).map(|w| 0.5 * (w[1] - w[0]) * (gauge.dpsi(w[0]) + gauge.dpsi(w[1]))).sum();
            prop_assert!((integral - gauge.psi(*s)).abs() <= 1e-10 * gauge.psi(*s).max(1e-12));
        }
        let report = check_inequalities(&gauge, 500, seed).unwrap();
        prop_assert!(report.passed(), "{report:?}");
    }
}
