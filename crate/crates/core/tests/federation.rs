use fedcal::calibrators::{
    binning_fit_local, scaler_fit_local, Calibrator, FitOptions, ScalerParams, ScalingStructure, WeightMode,
};
use fedcal::data::{
    dirichlet_label_skew_partition, pooled_split, split_local, synthetic_miscalibrated_generate, ClientDataset,
    LogitRecord, PartitionSpec, Split, SplitFractions, SyntheticSpec,
};
use fedcal::federation::{
    fedavg_update, run_fed_binning, run_fed_scaling, sample_participants, AggregateState, BinningVariant,
    FedBinningOptions, FedScalingOptions, RoundConfig,
};
use fedcal::metrics::PredictionSet;
use fedcal::privacy::{ClipSpec, PrivacyBudget, PrivacyPlan};
use fedcal::scalar::argmax;

fn clients(seed: u64, c: usize, n: usize, k: usize, beta: f64) -> Vec<ClientDataset<f64>> {
    let spec = SyntheticSpec {
        n_classes: c,
        n_samples: n,
        seed,
        ..SyntheticSpec::default()
    };
    let records = synthetic_miscalibrated_generate::<f64>(&spec).unwrap();
    dirichlet_label_skew_partition(&records, &PartitionSpec { beta, clients: k, seed })
        .unwrap()
        .iter()
        .map(|cl| split_local(cl, &SplitFractions::default(), seed).unwrap())
        .collect()
}

fn binning(variant: BinningVariant, weighting: WeightMode) -> FedBinningOptions {
    FedBinningOptions {
        bin_exponent: 5,
        variant,
        weighting,
    }
}

#[test]
fn full_participation_matches_central_histograms() {
    let cs = clients(3, 4, 2000, 12, 0.3);
    let out = run_fed_binning(&cs, &binning(BinningVariant::Histogram, WeightMode::None), &RoundConfig::new(1, 1.0, 3))
        .unwrap();
    let (logits, labels) = pooled_split(&cs, Split::Calibration);
    let central = binning_fit_local(&PredictionSet::from_logits(&logits, labels).unwrap(), 5).unwrap();
    assert_eq!(out.state.per_class, central);
}

#[test]
fn repeated_full_rounds_scale_counts_but_not_predictions() {
    let cs = clients(4, 3, 1200, 6, 1.0);
    let opts = binning(BinningVariant::Histogram, WeightMode::None);
    let once = run_fed_binning(&cs, &opts, &RoundConfig::new(1, 1.0, 4)).unwrap();
    let thrice = run_fed_binning(&cs, &opts, &RoundConfig::new(3, 1.0, 4)).unwrap();
    for (a, b) in once.state.per_class.iter().zip(&thrice.state.per_class) {
        let tripled: Vec<f64> = a.pos.iter().map(|x| 3.0 * x).collect();
        assert_eq!(b.pos, tripled);
    }
    let (test, _) = pooled_split(&cs, Split::Test);
    for z in &test {
        let (p, q) = (once.calibrator.calibrate(z), thrice.calibrator.calibrate(z));
        for (x, y) in p.iter().zip(&q) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}

#[test]
fn aggregate_state_ignores_round_order() {
    let cs = clients(5, 3, 900, 6, 0.5);
    let per_client: Vec<_> = cs
        .iter()
        .map(|c| {
            let (l, y) = c.split_arrays(Split::Calibration);
            let preds = if l.is_empty() {
                PredictionSet::from_flat(3, Vec::new(), Vec::new()).unwrap()
            } else {
                PredictionSet::from_logits(&l, y).unwrap()
            };
            binning_fit_local(&preds, 4).unwrap()
        })
        .collect();
    let mut forward = AggregateState::empty(3, 16);
    let mut backward = AggregateState::empty(3, 16);
    for h in &per_client {
        forward.accumulate(h).unwrap();
    }
    for h in per_client.iter().rev() {
        backward.accumulate(h).unwrap();
    }
    assert_eq!(forward.per_class, backward.per_class);
}

#[test]
fn alphas_are_one_under_full_participation() {
    let cs = clients(6, 4, 1500, 8, 0.2);
    let out = run_fed_binning(&cs, &binning(BinningVariant::Bbq, WeightMode::AllWeight), &RoundConfig::new(1, 1.0, 6))
        .unwrap();
    for a in &out.alphas {
        assert!(*a == 1.0 || *a == 0.0, "{a}");
    }
    assert!(out.reports[0].alpha_summary.is_some());
}

#[test]
fn scaling_rounds_average_participant_fits() {
    let cs = clients(7, 3, 1500, 10, 0.5);
    let opts = FedScalingOptions::new(ScalingStructure::Vector, false);
    let fit = FitOptions::default();
    let mut global = opts.initial_params::<f64>(3);
    for t in 0..2 {
        let mut locals = Vec::new();
        for k in sample_participants(cs.len(), 0.5, 7, t).unwrap() {
            let (l, y) = cs[k].split_arrays(Split::Calibration);
            let local = scaler_fit_local(&l, &y, 3, ScalingStructure::Vector, Some(&global), &fit).unwrap();
            if !local.no_data {
                locals.push(local.params);
            }
        }
        global = fedavg_update(&global, &locals, 1.0, None).unwrap();
        let run = run_fed_scaling(&cs, &opts, &RoundConfig::new(t + 1, 0.5, 7)).unwrap();
        assert_eq!(run.params, global, "round {}", t + 1);
    }
}

#[test]
fn single_client_global_equals_local_fit() {
    let cs = clients(8, 4, 400, 1, 1.0);
    let (l, y) = cs[0].split_arrays(Split::Calibration);
    for structure in [ScalingStructure::Temperature, ScalingStructure::Vector, ScalingStructure::Matrix] {
        let opts = FedScalingOptions::new(structure, false);
        let init = opts.initial_params::<f64>(4);
        let local = scaler_fit_local(&l, &y, 4, structure, Some(&init), &FitOptions::default()).unwrap();
        let run = run_fed_scaling(&cs, &opts, &RoundConfig::new(1, 1.0, 8)).unwrap();
        // The server update passes through the flat form, 1/a for temperature.
        for (a, b) in run.params.to_flat().iter().zip(local.params.to_flat()) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{structure:?}: {a} vs {b}");
        }
    }
}

#[test]
fn identical_clients_are_a_fixed_point_for_temperature() {
    let base = clients(9, 3, 300, 1, 1.0).remove(0);
    let copies: Vec<ClientDataset<f64>> = (0..4)
        .map(|k| ClientDataset::new(k, base.records.clone()))
        .collect();
    let (l, y) = base.split_arrays(Split::Calibration);
    let local = scaler_fit_local(&l, &y, 3, ScalingStructure::Temperature, None, &FitOptions::default()).unwrap();
    let ScalerParams::Temperature { temperature: want } = local.params else { panic!() };
    let opts = FedScalingOptions::new(ScalingStructure::Temperature, false);
    for rounds in 1..=3 {
        let run = run_fed_scaling(&copies, &opts, &RoundConfig::new(rounds, 1.0, 9)).unwrap();
        let ScalerParams::Temperature { temperature } = run.params else { panic!() };
        assert!((temperature - want).abs() <= 1e-12 * want, "{temperature} vs {want}");
    }
}

#[test]
fn runs_are_deterministic() {
    let cs = clients(10, 4, 1500, 20, 0.1);
    let plan = PrivacyPlan::new(PrivacyBudget::new(1.0, 1e-5).unwrap(), ClipSpec::Scaling { c: 0.5 }, 4, 4).unwrap();
    let mut cfg = RoundConfig::new(4, 0.3, 10);
    cfg.privacy = Some(plan);
    let opts = FedScalingOptions::new(ScalingStructure::Vector, true);
    let a = run_fed_scaling(&cs, &opts, &cfg).unwrap();
    let b = run_fed_scaling(&cs, &opts, &cfg).unwrap();
    assert_eq!(a.params, b.params);
    assert_eq!(a.reports, b.reports);

    let plan = PrivacyPlan::new(
        PrivacyBudget::new(1.0, 1e-5).unwrap(),
        ClipSpec::Binning {
            c_plus: 10.0,
            c_minus: 50.0,
        },
        4,
        4,
    )
    .unwrap();
    cfg.privacy = Some(plan);
    let opts = binning(BinningVariant::Bbq, WeightMode::ChangedWeight);
    let a = run_fed_binning(&cs, &opts, &cfg).unwrap();
    let b = run_fed_binning(&cs, &opts, &cfg).unwrap();
    assert_eq!(a.state, b.state);
    assert_eq!(a.reports, b.reports);
}

#[test]
fn temperature_and_op_runs_keep_test_accuracy() {
    let cs = clients(11, 5, 3000, 30, 0.1);
    let base: Vec<&LogitRecord<f64>> = cs.iter().flat_map(|c| c.split(Split::Test)).collect();
    for opts in [
        FedScalingOptions::new(ScalingStructure::Temperature, false),
        FedScalingOptions::new(ScalingStructure::Vector, true),
        FedScalingOptions::new(ScalingStructure::Matrix, true),
    ] {
        let run = run_fed_scaling(&cs, &opts, &RoundConfig::new(3, 0.2, 11)).unwrap();
        let first = run.reports[0].accuracy;
        assert!(run.reports.iter().all(|r| r.accuracy == first));
        for r in &base {
            assert_eq!(argmax(&run.calibrator.calibrate(&r.logits)), argmax(&r.logits));
        }
    }
}

#[test]
fn dp_reports_carry_sigma_and_respect_clip() {
    let cs = clients(12, 3, 2000, 20, 0.3);
    let plan = PrivacyPlan::new(PrivacyBudget::new(2.0, 1e-5).unwrap(), ClipSpec::Scaling { c: 0.5 }, 5, 3).unwrap();
    let sigma = plan.sigma;
    let mut cfg = RoundConfig::new(5, 0.5, 12);
    cfg.privacy = Some(plan);
    let run = run_fed_scaling(&cs, &FedScalingOptions::new(ScalingStructure::Temperature, false), &cfg).unwrap();
    for r in &run.reports {
        assert_eq!(r.noise_sigma, Some(sigma));
        assert!(r.max_contribution_norm <= 0.5 + 1e-12);
    }
    assert!(matches!(run.calibrator, Calibrator::Scaling { .. }));
}

#[test]
fn mismatched_plan_is_rejected() {
    let cs = clients(13, 3, 300, 4, 1.0);
    let plan = PrivacyPlan::new(PrivacyBudget::new(1.0, 1e-5).unwrap(), ClipSpec::Scaling { c: 0.5 }, 2, 3).unwrap();
    let mut cfg = RoundConfig::new(2, 1.0, 13);
    cfg.privacy = Some(plan);
    assert!(run_fed_binning(&cs, &binning(BinningVariant::Histogram, WeightMode::None), &cfg).is_err());
    cfg.rounds = 3;
    assert!(run_fed_scaling(&cs, &FedScalingOptions::new(ScalingStructure::Temperature, false), &cfg).is_err());
}
