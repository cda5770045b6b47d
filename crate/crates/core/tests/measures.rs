use contact_hj::experiments::{analyze, scheme_for, ExperimentConfig};
use contact_hj::flow::vector_field_norm;
use contact_hj::hamiltonians::{AdvectedLinear, Hamiltonian, PrescribedSolution};
use contact_hj::mather::{classify_stability, hu_average, occupation_measure, AveragingConfig, MeasureKind, Stability};
use contact_hj::ContactState64;

fn config(text: &str) -> ExperimentConfig {
    ExperimentConfig::parse(text).unwrap()
}

#[test]
fn occupation_measures_are_invariant_in_weak_form() {
    let cfg = AveragingConfig { t_burn: 20.0, t_avg: 100.0, dt: 1e-3, n_bins: 256, rec_tol: 1e-3 };
    let ex3 = AdvectedLinear::new(1.0, 0.5, 4.0);
    let ex1 = PrescribedSolution::default_pair(4.0);
    let cases: [(&dyn Hamiltonian<f64>, ContactState64); 3] = [
        (&ex3, ContactState64::new(0.4, 0.0, 0.0)),
        (&ex3, ContactState64::new(2.0, 0.0, 0.0)),
        (&ex1, ContactState64::new(1.0, 0.5 * 1f64.cos(), 0.5 * 1f64.sin())),
    ];
    for (m, z) in cases {
        let mu = occupation_measure(m, z, &cfg).unwrap();
        let fs: [&dyn Fn(&ContactState64) -> f64; 3] = [
            &|q| m.d_u(q.x, q.p, q.u),
            &|q| m.eval(q.x, q.p, q.u),
            &|q| q.x.sin(),
        ];
        for f in fs {
            let sup = mu.atoms.iter().map(|(q, _)| f(q).abs()).fold(0.0, f64::max);
            let before = mu.integrate(f);
            let after = mu.integrate_pushed(m, 1.0, 1e-3, f).unwrap();
            // F vanishing on the support leaves only round-off to compare
            assert!((before - after).abs() <= 20.0 / cfg.t_avg * sup + 1e-10, "{} {before} {after}", m.name());
        }
    }
}

#[test]
fn ensembles_sit_on_the_graph_and_diracs_are_fixed_points() {
    for text in ["a = 0\nb = 0.5", "a = 1\nb = 2", "model = example1"] {
        let cfg = config(text);
        let model = cfg.model();
        let scheme = scheme_for(&cfg, model.as_ref()).unwrap();
        let an = analyze(&cfg, model.as_ref(), &scheme).unwrap();
        assert!(!an.ensemble.is_empty());
        for member in &an.ensemble {
            for (z, _) in &member.measure.atoms {
                assert!(an.graph.distance_to(z) <= an.mane.dist_tol, "{text}: atom off the graph");
            }
            if member.extreme_candidate {
                assert_eq!(member.kind(), MeasureKind::Dirac);
                assert!(vector_field_norm(model.as_ref(), &member.measure.atoms[0].0) <= cfg.fp_tol);
            }
        }
    }
}

#[test]
fn prescribed_solution_diracs_at_critical_points() {
    let cfg = config("model = example1");
    let model = cfg.model();
    let scheme = scheme_for(&cfg, model.as_ref()).unwrap();
    let an = analyze(&cfg, model.as_ref(), &scheme).unwrap();
    let mut xs: Vec<f64> = an.ensemble.iter().filter(|m| m.extreme_candidate).map(|m| m.measure.atoms[0].0.x).collect();
    xs.sort_by(f64::total_cmp);
    assert_eq!(xs.len(), 2);
    assert!((xs[0] - std::f64::consts::FRAC_PI_2).abs() < 1e-6);
    assert!((xs[1] - 1.5 * std::f64::consts::PI).abs() < 1e-6);
    // -f at the two critical points of g: 3/2 and 1/2
    let report = classify_stability(&an.ensemble, cfg.crit_tol);
    assert_eq!(report.verdict, Stability::AsymptoticallyStable);
    assert!((report.rate.unwrap() - 0.5).abs() < 1e-6);
}

#[test]
fn reported_minimum_is_monotone_in_b() {
    let mut last = f64::NEG_INFINITY;
    for b in [-1.0, -0.25, 0.5, 1.25, 2.0] {
        let m = AdvectedLinear::new(1.0, b, 4.0);
        let cfg = AveragingConfig { t_burn: 5.0, t_avg: 30.0, ..AveragingConfig::default() };
        let mu = occupation_measure(&m, ContactState64::new(0.0, 0.0, 0.0), &cfg).unwrap();
        let avg = hu_average(&m, &mu);
        assert!(avg >= last);
        assert!((avg - b).abs() < 1e-2);
        last = avg;
    }
}
