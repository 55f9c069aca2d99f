use std::collections::HashSet;

use proptest::prelude::*;
use sgap_core::data::{
    features_to_bin, load_dataset, parse_features_bin, parse_features_csv, save_dataset, sbm_block,
    synth_sbm, Dataset, FeatureFormat, SbmParams,
};
use sgap_core::pipeline::{
    canonicalize, enumerate_space, inference_cost, preset, run_sgap, CostModel, CostScope, RunContext,
    PRESET_NAMES, RAW_GRID_SIZE, SPACE_SIZE,
};
use sgap_core::{
    ArchitectureConfig, GraphAggregator as Ga, GraphCSR, Matrix, MessageAggregatorKind as Ma, Splits,
    TrainConfig,
};

fn arch(k_pre: usize, ga_pre: Ga, ma: Ma, k_trans: usize, k_post: usize, ga_post: Ga) -> ArchitectureConfig {
    ArchitectureConfig { k_pre, ga_pre, ma, k_trans, k_post, ga_post }
}

const PRE: [Ga; 5] = [Ga::AugNa, Ga::Ppr(0.1), Ga::Ppr(0.2), Ga::Ppr(0.3), Ga::TriangleIa];

#[test]
fn enumeration_is_a_bijection_onto_canonical_configs() {
    let mut seen = HashSet::with_capacity(SPACE_SIZE);
    let mut raw = 0usize;
    // Independent nested-loop generator over the raw grid.
    for k_pre in 0..=10 {
        for ga_pre in PRE {
            for ma in Ma::ALL {
                for k_trans in 1..=10 {
                    for k_post in 0..=10 {
                        for ga_post in PRE {
                            raw += 1;
                            let c = canonicalize(arch(k_pre, ga_pre, ma, k_trans, k_post, ga_post)).unwrap();
                            seen.insert(c);
                        }
                    }
                }
            }
        }
    }
    assert_eq!(raw, RAW_GRID_SIZE);
    assert_eq!(seen.len(), SPACE_SIZE);
    let listed: HashSet<ArchitectureConfig> = enumerate_space().collect();
    assert_eq!(listed, seen);
    for (i, a) in enumerate_space().enumerate() {
        assert_eq!(a.index(), Some(i));
        assert_eq!(ArchitectureConfig::from_index(i), Some(a));
    }
    assert_eq!(enumerate_space().next(), Some(arch(0, Ga::Unused, Ma::None, 1, 0, Ga::Unused)));
}

#[test]
fn encodings_are_injective() {
    let mut seen = HashSet::with_capacity(SPACE_SIZE);
    for a in enumerate_space() {
        let bits: Vec<u64> = sgap_core::search::encode(&a).unwrap().iter().map(|x| x.to_bits()).collect();
        assert!(seen.insert(bits));
    }
}

#[test]
fn canonicalization_examples() {
    let a = canonicalize(arch(0, Ga::Ppr(0.2), Ma::Mean, 2, 0, Ga::AugNa)).unwrap();
    assert_eq!((a.ga_pre, a.ga_post), (Ga::Unused, Ga::Unused));
    assert!(canonicalize(arch(11, Ga::AugNa, Ma::Mean, 2, 0, Ga::Unused)).is_err());
    assert!(canonicalize(arch(2, Ga::AugNa, Ma::Mean, 0, 0, Ga::Unused)).is_err());
    assert!(canonicalize(arch(2, Ga::Unused, Ma::Mean, 1, 0, Ga::Unused)).is_err());
}

#[test]
fn preset_table() {
    let v3 = preset("pasca-v3").unwrap().config;
    assert_eq!(
        v3.to_json(),
        r#"{"k_pre":6,"ga_pre":"aug_na","ma":"adaptive","k_trans":3,"k_post":4,"ga_post":{"ppr":0.3}}"#
    );
    assert_eq!(preset("pasca-v1").unwrap().config, arch(3, Ga::Ppr(0.1), Ma::Weighted, 2, 0, Ga::Unused));
    let sgc = preset("sgc").unwrap().config;
    assert_eq!((sgc.ga_pre, sgc.ma, sgc.k_trans), (Ga::AugNa, Ma::None, 1));
    for name in PRESET_NAMES {
        assert!(preset(name).unwrap().config.is_canonical());
    }
    let err = preset("gcn").unwrap_err().to_string();
    assert!(PRESET_NAMES.iter().all(|n| err.contains(n)));
}

#[test]
fn cost_examples() {
    let base = arch(0, Ga::Unused, Ma::None, 1, 0, Ga::Unused);
    assert_eq!(inference_cost(&base, 1, 1, 4, 2), 8);
    let a = arch(3, Ga::AugNa, Ma::Mean, 2, 2, Ga::Ppr(0.1));
    let b = ArchitectureConfig { k_post: 3, ..a };
    assert_eq!(inference_cost(&b, 50, 300, 8, 3) - inference_cost(&a, 50, 300, 8, 3), 300 * 3);
    // Layer-0 input width triples for Concatenate at k_pre = 2.
    let m = CostModel { nodes: 1, nnz: 1, feat_dim: 4, classes: 2, hidden: 8, scope: CostScope::Online };
    let mean = arch(2, Ga::AugNa, Ma::Mean, 2, 0, Ga::Unused);
    let cat = ArchitectureConfig { ma: Ma::Concatenate, ..mean };
    let mean_mlp = m.cost(&mean) - 4 * 3;
    assert_eq!(mean_mlp, 4 * 8 + 8 * 2);
    assert_eq!(m.cost(&cat), 12 * 8 + 8 * 2);
}

proptest! {
    #[test]
    fn canonicalize_is_idempotent(i in 0usize..RAW_GRID_SIZE) {
        let (mut r, mut parts) = (i, [0usize; 6]);
        for (slot, base) in parts.iter_mut().zip([11usize, 5, 6, 10, 11, 5]).rev() {
            *slot = r % base;
            r /= base;
        }
        let raw = arch(parts[0], PRE[parts[1]], Ma::ALL[parts[2]], parts[3] + 1, parts[4], PRE[parts[5]]);
        let once = canonicalize(raw).unwrap();
        prop_assert_eq!(canonicalize(once).unwrap(), once);
    }

    #[test]
    fn cost_is_monotone(i in 0usize..SPACE_SIZE, online in any::<bool>()) {
        let a = ArchitectureConfig::from_index(i).unwrap();
        let scope = if online { CostScope::Online } else { CostScope::Full };
        let m = CostModel { nodes: 100, nnz: 700, feat_dim: 16, classes: 4, hidden: 32, scope };
        let c = m.cost(&a);
        if a.k_pre < 10 {
            let ga_pre = if a.k_pre == 0 { Ga::AugNa } else { a.ga_pre };
            let next = ArchitectureConfig { k_pre: a.k_pre + 1, ga_pre, ..a };
            prop_assert!(m.cost(&next) >= c);
        }
        if a.k_trans < 10 {
            let next = ArchitectureConfig { k_trans: a.k_trans + 1, ..a };
            prop_assert!(m.cost(&next) >= c);
        }
        if a.k_post < 10 {
            let ga_post = if a.k_post == 0 { Ga::AugNa } else { a.ga_post };
            let next = ArchitectureConfig { k_post: a.k_post + 1, ga_post, ..a };
            prop_assert!(m.cost(&next) >= c);
        }
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) }
}

#[test]
fn structure_helps_on_sbm() {
    let smoothed = arch(3, Ga::AugNa, Ma::Mean, 2, 0, Ga::Unused);
    let mlp = arch(0, Ga::Unused, Ma::None, 2, 0, Ga::Unused);
    let (mut s, mut m) = (Vec::new(), Vec::new());
    for seed in 0..10 {
        let ds = synth_sbm(&SbmParams { n: 200, blocks: 2, p_in: 0.5, p_out: 0.01, d: 8, noise: 3.0, seed })
            .unwrap();
        let cfg = TrainConfig { seed, ..TrainConfig::default() };
        let ctx = RunContext::default();
        s.push(run_sgap(&ds, &smoothed, &cfg, &ctx).unwrap().eval.test_accuracy);
        m.push(run_sgap(&ds, &mlp, &cfg, &ctx).unwrap().eval.test_accuracy);
    }
    assert!(median(s.clone()) >= median(m.clone()), "{s:?} vs {m:?}");
}

fn small_dataset(labels: Vec<usize>, num_classes: usize) -> Dataset {
    let n = labels.len();
    let g = GraphCSR::from_edges(n, (0..n - 1).map(|i| (i, i + 1))).unwrap();
    let x = Matrix::from_fn(n, 3, |v, j| ((v * 7 + j * 3) % 5) as f64 - 2.0);
    let idx: Vec<usize> = (0..n).collect();
    let splits = Splits { train: idx[..n / 2].to_vec(), val: idx[n / 2..3 * n / 4].to_vec(), test: idx[3 * n / 4..].to_vec() };
    Dataset::new(g, x, labels, splits, num_classes).unwrap()
}

#[test]
fn single_class_gives_perfect_accuracy() {
    let ds = small_dataset(vec![0; 24], 1);
    let cfg = TrainConfig { max_epochs: 5, ..TrainConfig::default() };
    for i in [0, 1234, 77_777, SPACE_SIZE - 1] {
        let a = ArchitectureConfig::from_index(i).unwrap();
        let r = run_sgap(&ds, &a, &cfg, &RunContext::default()).unwrap();
        assert_eq!(r.eval.test_accuracy, 1.0, "{a}");
    }
}

#[test]
fn post_processing_stages() {
    let ds = small_dataset((0..24).map(|v| v / 12).collect(), 2);
    let cfg = TrainConfig { max_epochs: 20, ..TrainConfig::default() };
    let ctx = RunContext::default();
    let no_post = run_sgap(&ds, &arch(2, Ga::AugNa, Ma::Mean, 2, 0, Ga::Unused), &cfg, &ctx).unwrap();
    assert!(no_post.final_predictions.bitwise_eq(&no_post.stage2_predictions));
    let tri = run_sgap(&ds, &arch(2, Ga::AugNa, Ma::Mean, 2, 7, Ga::TriangleIa), &cfg, &ctx).unwrap();
    for v in 0..24 {
        let row = tri.final_predictions.row(v);
        assert!(row.iter().all(|&p| p >= 0.0));
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn run_is_seed_deterministic() {
    let ds = synth_sbm(&SbmParams { n: 120, seed: 4, ..SbmParams::default() }).unwrap();
    let a = preset("pasca-v3").unwrap().config;
    let cfg = TrainConfig { seed: 7, max_epochs: 40, ..TrainConfig::default() };
    let r1 = run_sgap(&ds, &a, &cfg, &RunContext::default()).unwrap();
    let r2 = run_sgap(&ds, &a, &cfg, &RunContext::default()).unwrap();
    assert!(r1.final_predictions.bitwise_eq(&r2.final_predictions));
    assert_eq!(r1.model.params, r2.model.params);
}

#[test]
fn dataset_round_trips_in_both_formats() {
    let ds = synth_sbm(&SbmParams { n: 60, d: 5, seed: 2, ..SbmParams::default() }).unwrap();
    for format in [FeatureFormat::Csv, FeatureFormat::Bin] {
        let dir = tempfile::tempdir().unwrap();
        save_dataset(dir.path(), &ds, format).unwrap();
        let back = load_dataset(dir.path()).unwrap();
        assert_eq!(back.graph, ds.graph);
        assert_eq!(back.labels, ds.labels);
        assert_eq!(back.splits, ds.splits);
        if format == FeatureFormat::Csv {
            assert!(back.features.bitwise_eq(&ds.features));
        }
    }
}

#[test]
fn toy_directory_round_trips_bitwise() {
    let ds = Dataset::new(
        GraphCSR::from_edges(3, [(0, 1), (1, 2)]).unwrap(),
        Matrix::from_rows(&[vec![0.5, -1.0], vec![1.0 / 3.0, 2.0], vec![1e-300, 7.0]]).unwrap(),
        vec![0, 1, 1],
        Splits { train: vec![0], val: vec![1], test: vec![2] },
        2,
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_dataset(dir.path(), &ds, FeatureFormat::Csv).unwrap();
    assert_eq!(load_dataset(dir.path()).unwrap(), ds);
}

#[test]
fn csv_and_binary_features_agree() {
    let x = Matrix::from_fn(7, 3, |v, j| (v as f64 * 0.37 - j as f64 * 1.3).sin() * 10f64.powi(j as i32 - 1));
    // Same data written through f32 in both formats.
    let as_f32 = Matrix::from_fn(7, 3, |v, j| x.get(v, j) as f32 as f64);
    let bin = parse_features_bin(&features_to_bin(&x), "x.bin".as_ref()).unwrap();
    let csv_text: String = (0..7)
        .map(|v| (0..3).map(|j| format!("{}", x.get(v, j) as f32)).collect::<Vec<_>>().join(",") + "\n")
        .collect();
    let csv = parse_features_csv(&csv_text, "x.csv".as_ref()).unwrap();
    for v in 0..7 {
        for j in 0..3 {
            let (a, b) = (bin.get(v, j), csv.get(v, j));
            assert_eq!(a, as_f32.get(v, j));
            // The binary format is 32-bit, so agreement is to one f32 ulp.
            assert!((a - b).abs() <= f32::EPSILON as f64 * a.abs().max(b.abs()), "{a} vs {b}");
            assert_eq!(b as f32, a as f32);
        }
    }
}

#[test]
fn overlapping_splits_rejected() {
    let g = GraphCSR::from_edges(4, [(0, 1)]).unwrap();
    let r = Dataset::new(
        g,
        Matrix::zeros(4, 2),
        vec![0, 1, 0, 1],
        Splits { train: vec![0, 1], val: vec![1], test: vec![2] },
        2,
    );
    assert!(r.is_err());
}

#[test]
fn sbm_edge_counts_follow_binomial() {
    let p = SbmParams { n: 400, blocks: 2, p_in: 0.05, p_out: 0.01, d: 4, noise: 1.0, seed: 13 };
    let ds = synth_sbm(&p).unwrap();
    let nb = 200.0;
    let pairs = nb * (nb - 1.0) / 2.0;
    for b in 0..2 {
        let mut count = 0usize;
        for u in 0..400 {
            for &v in ds.graph.neighbors(u) {
                if u < v && sbm_block(u, 400, 2) == b && sbm_block(v, 400, 2) == b {
                    count += 1;
                }
            }
        }
        let mean = pairs * p.p_in;
        let sd = (pairs * p.p_in * (1.0 - p.p_in)).sqrt();
        assert!((count as f64 - mean).abs() <= 3.0 * sd, "block {b}: {count} vs {mean}±{sd}");
    }
}

#[test]
fn sbm_structure_and_seeds() {
    let p = SbmParams { p_out: 0.0, p_in: 0.3, n: 90, blocks: 3, ..SbmParams::default() };
    let ds = synth_sbm(&p).unwrap();
    assert_eq!(ds.graph.num_components(), 3);
    let other = synth_sbm(&SbmParams { seed: 1, ..p }).unwrap();
    assert_ne!(other.graph, ds.graph);
    assert_eq!(synth_sbm(&p).unwrap(), ds);
    assert!(synth_sbm(&SbmParams { p_in: 0.01, p_out: 0.02, ..p }).is_err());
    let n = ds.num_nodes();
    assert_eq!(ds.splits.train.len() + ds.splits.val.len() + ds.splits.test.len(), n);
}
