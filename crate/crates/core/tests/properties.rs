mod common;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tricon::closed_loop::ClosedLoopMatrix;
use tricon::matalg::{eig_sym, inertia_with, z_matrix_pd_test, metzler_summary, nonneg_inverse, schur_complement};
use tricon::network::{
    block_row_sums, check_close_friendship, load_network, validate_clustering, Labeling, SignedNetwork,
};
use tricon::signcons::{assemble_gains, boundary_gains, certify_sign, synthesize_sign, SignConfig};
use tricon::simulate::{analytic_limit, classify, integrate, random_initial_state, ConsensusKind};
use tricon::tripartite::{
    gains_from_ratios, schur_null_residual, synthesize_tripartite, verify_structured_kernel, KernelVerdict,
    SearchConfig, KERNEL_MATCH_TOL,
};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_pair(seed: u64, n: usize) -> (DVector<f64>, DMatrix<f64>) {
    let mut r = rng(seed);
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            if r.random_bool(0.6) {
                let w = r.random_range(0.0..5.0);
                a[(i, j)] = w;
                a[(j, i)] = w;
            }
        }
    }
    let d = DVector::from_iterator(n, (0..n).map(|i| r.random_range(0.0..1.3 * a.row(i).sum() + 0.5)));
    (d, a)
}

fn random_symmetric(r: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let b = DMatrix::from_fn(n, n, |_, _| r.random_range(-1.0..1.0));
    (&b + b.transpose()) * 0.5
}

fn random_ratio(r: &mut ChaCha8Rng) -> f64 {
    let mag = 2f64.powf(r.random_range(-3.0..6.0));
    if r.random_bool(0.5) { mag } else { -mag }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn load_serialize_roundtrip(seed in any::<u64>()) {
        let net = common::random_sparse(seed, 5, 0.5);
        let back = load_network(&net.to_json()).unwrap();
        prop_assert_eq!(back.weights(), net.weights());
        prop_assert_eq!(back.clusters(), net.clusters());
    }

    #[test]
    fn row_sums_rebuild_degree_vector(seed in any::<u64>()) {
        let net = common::random_sparse(seed, 5, 0.5);
        let sums = block_row_sums(&net);
        let total = net.weights() * DVector::from_element(net.size(), 1.0);
        for p in 0..3 {
            let mut acc = DVector::zeros(net.cluster(p).len());
            for q in 0..3 {
                acc += sums.get(p, q);
            }
            prop_assert!((acc - net.gather(&total, p)).amax() < 1e-12);
        }
    }

    #[test]
    fn relabeling_preserves_validation(seed in any::<u64>(), perm in 0usize..6) {
        let net = common::random_sparse(seed, 4, 0.6);
        let base = validate_clustering(&net);
        let p = Labeling::all().nth(perm).unwrap().roles();
        let moved = validate_clustering(&net.permute_clusters(p));
        let mut a: Vec<bool> = base.checks.iter().map(|c| c.passed).collect();
        let mut b: Vec<bool> = moved.checks.iter().map(|c| c.passed).collect();
        a.sort();
        b.sort();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn friendship_is_monotone(seed in any::<u64>(), pick in any::<u64>()) {
        let net = common::random_sparse(seed, 4, 0.4);
        for labeling in Labeling::all() {
            let (i1, i2) = (labeling.i1(), labeling.i2());
            let before = check_close_friendship(&net, i1, i2).unwrap();
            let group = net.cluster(i2);
            let pairs: Vec<(usize, usize)> = (0..group.len())
                .flat_map(|a| ((a + 1)..group.len()).map(move |b| (a, b)))
                .filter(|&(a, b)| net.weight(group[a], group[b]) == 0.0)
                .collect();
            if !before.holds || pairs.is_empty() {
                continue;
            }
            let (a, b) = pairs[(pick % pairs.len() as u64) as usize];
            let mut w = net.weights().clone();
            w[(group[a], group[b])] = 1.0;
            w[(group[b], group[a])] = 1.0;
            let denser = SignedNetwork::new(w, net.clusters().clone()).unwrap();
            prop_assert!(check_close_friendship(&denser, i1, i2).unwrap().holds);
        }
    }

    #[test]
    fn pd_test_agrees_with_eigenvalues(seed in any::<u64>(), n in 1usize..=8) {
        let (d, a) = random_pair(seed, n);
        let oracle = eig_sym(&(DMatrix::from_diagonal(&d) - &a)).unwrap().min_eigenvalue() > 1e-9;
        let cert = z_matrix_pd_test(&d, &a).unwrap();
        prop_assert_eq!(cert.is_some(), oracle);
        if let Some(v) = cert {
            prop_assert!(v.min() > 0.0);
            prop_assert!(((DMatrix::from_diagonal(&d) - &a) * v).min() > 0.0);
        }
    }

    #[test]
    fn nonneg_inverse_is_an_inverse(seed in any::<u64>(), n in 1usize..=8) {
        let (d, a) = random_pair(seed, n);
        if z_matrix_pd_test(&d, &a).unwrap().is_none() {
            prop_assert!(nonneg_inverse(&d, &a).is_err());
            return Ok(());
        }
        let x = nonneg_inverse(&d, &a).unwrap();
        let residual = (DMatrix::from_diagonal(&d) - &a) * &x - DMatrix::identity(n, n);
        prop_assert!(residual.amax() < 1e-9);
        prop_assert!(x.min() >= -1e-12);
    }

    #[test]
    fn haynsworth_additivity(seed in any::<u64>(), n in 2usize..=8, head_frac in 0.1f64..0.9) {
        let mut r = rng(seed);
        let mut m = random_symmetric(&mut r, n) * 4.0;
        let head = ((n as f64 * head_frac) as usize).clamp(1, n - 1);
        let lead_min = eig_sym(&m.view((0, 0), (head, head)).into_owned()).unwrap().min_eigenvalue();
        for k in 0..head {
            m[(k, k)] += 1.0 - lead_min.min(0.0);
        }
        let inertia = |x: &DMatrix<f64>| inertia_with(&eig_sym(x).unwrap().eigenvalues, 1e-9);
        let lead = inertia(&m.view((0, 0), (head, head)).into_owned());
        let tail = inertia(&schur_complement(&m, head).unwrap());
        prop_assert_eq!((lead.0 + tail.0, lead.1 + tail.1, lead.2 + tail.2), inertia(&m));
    }

    #[test]
    fn irreducible_metzler_has_simple_frobenius_root(seed in any::<u64>(), n in 1usize..=7) {
        let mut r = rng(seed);
        // ring plus random extra positive off-diagonal entries
        let m = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                r.random_range(-5.0..5.0)
            } else if j == (i + 1) % n || r.random_bool(0.3) {
                r.random_range(0.1..3.0)
            } else {
                0.0
            }
        });
        let s = metzler_summary(&m);
        prop_assert!(s.is_metzler && s.is_irreducible);
        prop_assert_eq!(s.frobenius_multiplicity, 1);
    }

    #[test]
    fn structured_vector_is_annihilated(seed in any::<u64>(), pick in 0usize..6) {
        let net = common::random_admissible(seed, 4);
        let mut r = rng(seed ^ 0x5eed);
        let labeling = Labeling::all().nth(pick).unwrap();
        let (v2, v3) = (random_ratio(&mut r), random_ratio(&mut r));
        let g = gains_from_ratios(&net, labeling, v2, v3).unwrap();
        let w = g.kernel_vector(&net);
        prop_assert!((g.m.matrix() * &w).amax() < 1e-9 * g.m.max_abs_entry());
        // independent oracle: d_i = (A w)_i / w_i for any rescaling of w
        let c = r.random_range(0.1..10.0);
        let aw = net.weights() * (&w * c);
        for i in 0..net.size() {
            let d = aw[i] / (w[i] * c);
            prop_assert!((d - g.m.gains()[i]).abs() <= 1e-9 * d.abs().max(1.0));
        }
    }

    #[test]
    fn tripartite_success_invariants(seed in any::<u64>()) {
        let net = common::random_admissible(seed, 4);
        let Some(res) = synthesize_tripartite(&net, &SearchConfig::default()).certified() else {
            return Ok(());
        };
        prop_assert!(verify_structured_kernel(&net, &res.gains).is_certified());
        prop_assert!(schur_null_residual(&net, &res.gains).unwrap() < 1e-8);
        let w = res.gains.kernel_vector(&net);
        let x0 = random_initial_state(net.size(), seed);
        let limit = analytic_limit(&res.gains.m, &x0).unwrap();
        let along = &w * (w.dot(&limit) / w.norm_squared());
        prop_assert!((&limit - along).amax() < 1e-9 * (1.0 + limit.amax()));
        let v = classify(&res.gains.m, &net, &x0, 1e-6).unwrap();
        if !v.degenerate {
            prop_assert_eq!(v.kind, ConsensusKind::Tripartite);
            let ratios = res.gains.cluster_ratios();
            let got = v.ratios.unwrap();
            for p in 0..3 {
                prop_assert!((got[p] - ratios[p] / ratios[0]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn sign_success_invariants(seed in any::<u64>()) {
        let net = common::random_admissible(seed, 4);
        let Some(res) = synthesize_sign(&net, &SignConfig::default()).certified() else {
            return Ok(());
        };
        let g = &res.gains;
        let w = g.kernel_vector(&net);
        prop_assert!((g.m.matrix() * &w).amax() < 1e-9 * g.m.max_abs_entry());
        prop_assert_eq!(res.certificate.zero_multiplicity, 1);
        let lead = res.phi3_metzler.frobenius_eig.unwrap();
        prop_assert!(lead.abs() < 1e-8 * res.phi3.amax().max(1.0));
        prop_assert_eq!(res.phi3_metzler.frobenius_multiplicity, 1);

        // boundary gains are 0-homogeneous in (v1, v3)
        let c = 3.7;
        let (d1, d3) = boundary_gains(&net, g.labeling, &(&g.v1 * c), &(&g.v3 * c)).unwrap();
        prop_assert!((d1 - &g.d[g.labeling.i1()]).amax() < 1e-9 * g.m.max_abs_entry());
        prop_assert!((d3 - &g.d[g.labeling.i2()]).amax() < 1e-9 * g.m.max_abs_entry());

        // doubling a certified margin keeps the certificate
        let wider = assemble_gains(&net, g.labeling, &g.v1, &g.v3, 2.0 * g.margin).unwrap();
        prop_assert_eq!(certify_sign(&net, &wider, KERNEL_MATCH_TOL).status, KernelVerdict::Certified);
    }

    #[test]
    fn kernel_component_is_conserved(seed in any::<u64>()) {
        let net = common::random_admissible(seed, 3);
        let Some(res) = synthesize_tripartite(&net, &SearchConfig::default()).certified() else {
            return Ok(());
        };
        let m = &res.gains.m;
        let w = res.gains.kernel_vector(&net);
        let x0 = random_initial_state(net.size(), seed);
        let dt = 1e-3f64.min(1.0 / m.spectrum().max_eigenvalue());
        let traj = integrate(m, &x0, dt, 10.0).unwrap();
        let c0 = w.dot(&x0);
        let limit = analytic_limit(m, &x0).unwrap();
        let mut last = f64::INFINITY;
        for x in &traj.states {
            prop_assert!((w.dot(x) - c0).abs() < 1e-8 * w.norm() * x0.norm());
            let e = (x - &limit).norm();
            prop_assert!(e <= last + 1e-10);
            last = e;
        }
    }

    #[test]
    fn rk4_is_fourth_order(seed in any::<u64>()) {
        let mut r = rng(seed);
        let b = DMatrix::from_fn(6, 6, |_, _| r.random_range(-1.0..1.0));
        let mut psd = b.transpose() * &b;
        let top = eig_sym(&psd).unwrap().max_eigenvalue();
        psd *= 5.0 / top;
        let m = ClosedLoopMatrix::from_matrix(psd).unwrap();
        let x0 = DVector::from_fn(6, |_, _| r.random_range(-1.0..1.0));
        let s = m.spectrum();
        let decay = DVector::from_iterator(6, s.eigenvalues.iter().map(|l| (-l).exp()));
        let exact = &s.eigenvectors * DMatrix::from_diagonal(&decay) * s.eigenvectors.transpose() * &x0;
        let err = |dt: f64| (integrate(&m, &x0, dt, 1.0).unwrap().final_state() - &exact).norm();
        let ratio = err(0.1) / err(0.05);
        prop_assert!((12.0..20.0).contains(&ratio), "error ratio {ratio}");
    }
}
