use gerbelab::cech::{
    characteristic_class, circle_coboundary, derham_to_cech, good_cover_torus, CechForm, CircleCochain, GoodCover, Root,
};
use gerbelab::complex::{build_torus_complex, wedge_pairing, Cochain};
use gerbelab::connection::{
    holonomy, holonomy_with_primitives, local_primitives, point_gerbe_connection, validate_connection, GerbeConnection,
};
use gerbelab::hodge::{harmonic_basis, solve_poisson, FlatMetric};
use gerbelab::syz::{mirror_metric_check, HessianPotential, Scheme};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;
use std::sync::{Arc, OnceLock};

fn t3(n: usize) -> &'static (FlatMetric, GoodCover) {
    static CACHE: [OnceLock<(FlatMetric, GoodCover)>; 2] = [OnceLock::new(), OnceLock::new()];
    CACHE[n - 3].get_or_init(|| {
        let x = Arc::new(build_torus_complex(3, n).unwrap());
        (FlatMetric::new(x.clone()), good_cover_torus(x).unwrap())
    })
}

fn random_cochain(rng: &mut ChaCha8Rng, cells: usize, degree: usize) -> Cochain<f64> {
    Cochain::new(degree, (0..cells).map(|_| rng.random_range(-1.0..1.0)).collect())
}

fn mod1(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn wedge_pairing_is_leibniz_adjoint(seed in any::<u64>(), d in 1usize..=3, n in 2usize..=4, k_off in 0usize..3) {
        let x = build_torus_complex(d, n).unwrap();
        let k = 1 + k_off % d;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = Cochain::new(k - 1, (0..x.cell_count(k - 1)).map(|_| rng.random_range(-5i64..=5)).collect());
        let a = Cochain::new(d - k, (0..x.cell_count(d - k)).map(|_| rng.random_range(-5i64..=5)).collect());
        let lhs = wedge_pairing(&x, &x.coboundary(&c), &a).unwrap();
        let rhs = wedge_pairing(&x, &c, &x.coboundary(&a)).unwrap();
        let sign = if k % 2 == 0 { 1 } else { -1 };
        prop_assert_eq!(lhs, sign * rhs);
    }

    #[test]
    fn poisson_round_trip_is_orthogonal_to_harmonics(seed in any::<u64>(), k in 0usize..=3) {
        let (m, _) = t3(3);
        let x = m.complex();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_cochain(&mut rng, x.cell_count(k), k);
        let h = solve_poisson(m, &m.apply_laplacian(&a)).unwrap();
        let basis = &harmonic_basis(m, k).unwrap().basis;
        let dot = |u: &Cochain<f64>, v: &Cochain<f64>| u.values.iter().zip(&v.values).map(|(p, q)| p * q).sum::<f64>();
        for b in basis {
            prop_assert!(dot(&h, b).abs() < 1e-10);
        }
        // a − H is harmonic, so Δ(a − H) = 0.
        let diff = m.apply_laplacian(&a.sub(&h));
        prop_assert!(diff.values.iter().all(|v| v.abs() < 1e-8));
    }

    #[test]
    fn circle_coboundary_squares_to_zero(seed in any::<u64>(), p in 0usize..2) {
        let (_, cover) = t3(3);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut c = CircleCochain::zeros(cover, p);
        c.values.iter_mut().flatten().for_each(|v| *v = rng.random::<f64>());
        prop_assert!(circle_coboundary(cover, &circle_coboundary(cover, &c)).sup_norm_mod1() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn characteristic_class_is_additive(seed in any::<u64>(), a in -3i64..=3, b in -3i64..=3) {
        let (m, cover) = t3(3);
        let x = m.complex();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut curvature = |k: i64| {
            let eta = random_cochain(&mut rng, x.cell_count(2), 2);
            m.volume().scaled(k as f64).add(&x.coboundary(&eta))
        };
        let (g1, _) = derham_to_cech(cover, &curvature(a)).unwrap();
        let (g2, _) = derham_to_cech(cover, &curvature(b)).unwrap();
        let c1 = characteristic_class(cover, &g1).unwrap();
        let c2 = characteristic_class(cover, &g2).unwrap();
        let c12 = characteristic_class(cover, &g1.add(cover, &g2).unwrap()).unwrap();
        prop_assert_eq!(&c1.free, &vec![a]);
        prop_assert_eq!(&c2.free, &vec![b]);
        prop_assert_eq!(c12.free, vec![a + b]);
    }

    #[test]
    fn holonomy_survives_regauging(seed in any::<u64>(), t in prop::array::uniform3(0.0f64..1.0)) {
        let (m, cover) = t3(3);
        let h = harmonic_basis(m, 2).unwrap();
        let mut omega = Cochain::zeros(m.complex(), 2);
        for (b, s) in h.basis.iter().zip(t) {
            omega = omega.add(&b.scaled(TAU * s));
        }
        let c = GerbeConnection::flat_from_form(cover, &omega).unwrap();
        let hol = holonomy(cover, &c).unwrap();
        let b = local_primitives(cover, &c, Root::Lower).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut chi = CechForm::zeros(cover, 0, 0);
        chi.blocks.iter_mut().flatten().for_each(|v| *v = rng.random_range(-1.0..1.0));
        let regauged = holonomy_with_primitives(cover, &c, &b.add(&chi.d(cover))).unwrap();
        for j in 0..3 {
            prop_assert!(mod1(hol.values[j], t[j]) < 1e-9);
            prop_assert!(mod1(regauged.values[j], hol.values[j]) < 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn point_gerbe_quotients_are_flat(p in prop::array::uniform3(0.0f64..1.0), q in prop::array::uniform3(0.0f64..1.0)) {
        let (m, cover) = t3(4);
        let gp = point_gerbe_connection(m, cover, &p).unwrap();
        let gq = point_gerbe_connection(m, cover, &q).unwrap();
        let pq = gp.connection.tensor(cover, &gq.connection.inverse(cover).unwrap()).unwrap();
        let diag = validate_connection(cover, &pq);
        prop_assert!(diag.curvature_norm < 1e-8, "{}", diag.curvature_norm);
        prop_assert!(diag.max_residual() < 1e-8);
    }

    #[test]
    fn fd4_is_fourth_order(a in 0.01f64..0.05, k1 in 1i64..=2, k2 in 0i64..=2, phase in 0.0f64..TAU) {
        let q = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.5]);
        let f = move |x: &[f64]| a * (TAU * (k1 as f64 * x[0] + k2 as f64 * x[1]) + phase).sin();
        let error = |m: usize| {
            let phi = HessianPotential::from_fn(q.clone(), m, Scheme::Spectral, f).unwrap();
            let (g_exact, h_exact) = phi.derivative_fields_with(Scheme::Spectral);
            let (g_fd, h_fd) = phi.derivative_fields_with(Scheme::FiniteDifference4);
            let mut e = 0.0f64;
            for i in 0..phi.nodes() {
                e = e.max((&g_fd[i] - &g_exact[i]).amax()).max((&h_fd[i] - &h_exact[i]).amax());
            }
            e
        };
        let order = (error(16) / error(32)).log2();
        prop_assert!(order >= 3.5, "observed order {order}");
    }

    #[test]
    fn legendre_errors_shrink_with_resolution(a in -0.003f64..0.003, b in -0.003f64..0.003) {
        // Amplitudes keep Hess φ ≥ 0.7 I, so the dual stays well resolved.
        let check = |m: usize| {
            let q = DMatrix::from_row_slice(2, 2, &[1.5, 0.2, 0.2, 1.0]);
            let phi = HessianPotential::from_fn(q, m, Scheme::Spectral, |x| {
                a * (TAU * x[0]).cos() + b * (TAU * (x[0] - x[1])).sin()
            })
            .unwrap();
            mirror_metric_check(&phi).unwrap()
        };
        let (coarse, fine) = (check(16), check(32));
        prop_assert!(fine.involution_error < 1e-8);
        prop_assert!(fine.hessian_inverse_error < 1e-6);
        prop_assert!(fine.pullback_error < 1e-6);
        prop_assert!(fine.involution_error <= coarse.involution_error + 1e-13);
        prop_assert!(fine.hessian_inverse_error <= coarse.hessian_inverse_error + 1e-12);
    }
}
