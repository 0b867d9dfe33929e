use super::bench::bench;
use super::*;
use crate::surrogate::SurrogateConfig;

fn small_config(seed: u64) -> RunConfig {
    RunConfig {
        seed,
        library: LibraryConfig {
            alcohols: 10,
            chlorides: 4,
            acids: 4,
            purchasables: 3,
        },
        teacher: TeacherConfig {
            product_labels: 30,
            epochs: 2,
            batch_size: 16,
            hidden: 8,
            latent: 4,
            ..TeacherConfig::default()
        },
        distill: DistillConfig {
            sample_fraction: 0.3,
            holdout: 20,
            surrogate: SurrogateConfig {
                epochs: 5,
                batch_size: 16,
                ..SurrogateConfig::default()
            },
            ..DistillConfig::default()
        },
        stages: Stages {
            oracle: true,
            ..Stages::default()
        },
        ..RunConfig::default()
    }
}

fn manifest_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    STAGES
        .iter()
        .filter_map(|s| {
            let p = dir.join("manifests").join(format!("{s}.json"));
            std::fs::read(p).ok().map(|b| (s.to_string(), b))
        })
        .collect()
}

#[test]
fn full_run_chains_manifests_and_reruns_identically() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = small_config(3);
    let run = run_pipeline(&cfg, a.path()).unwrap();
    assert_eq!(run.manifests.len(), 7);
    assert!(run.manifests.iter().all(|m| m.status == "ok"));
    assert_eq!(run.manifests[0].previous, None);
    let react = run.manifest("react").unwrap();
    assert_eq!(react.counts["total"], json!(10 * 8));
    let screen = run.manifest("screen").unwrap();
    let survivors = screen.counts["surrogate_pass"].as_u64().unwrap();
    assert_eq!(screen.counts["teacher_calls"].as_u64().unwrap(), 18 + survivors + 3);
    assert!(run.manifest("oracle").unwrap().counts.contains_key("missed_by_two_stage"));
    assert_eq!(verify_run(a.path()).unwrap().len(), 7);

    run_pipeline(&cfg, b.path()).unwrap();
    run_pipeline(&cfg, a.path()).unwrap();
    let ma = manifest_bytes(a.path());
    assert_eq!(ma.len(), 7);
    assert_eq!(ma, manifest_bytes(b.path()));
    assert!(!std::fs::read_to_string(a.path().join("manifests/teacher.json")).unwrap().contains("seconds"));
}

#[test]
fn tampered_artifact_is_detected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        stages: Stages {
            filter: true,
            react: true,
            ..Stages::only("filter").unwrap()
        },
        ..small_config(1)
    };
    run_pipeline(&cfg, dir.path()).unwrap();
    verify_run(dir.path()).unwrap();
    let lib = dir.path().join("library.csv");
    let mut text = std::fs::read_to_string(&lib).unwrap();
    text.push_str("Z9999,alcohol,CCO\n");
    std::fs::write(&lib, text).unwrap();
    assert!(matches!(verify_run(dir.path()), Err(PipelineError::Tampered(_))));
}

#[test]
fn filter_only_on_ten_molecules() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.csv");
    std::fs::write(
        &input,
        "id,smiles\na,CCO\nb,CCCCl\nc,CC(=O)O\nd,c1ccccc1\ne,CCCCCC\nf,C1CCC1\ng,CC(C)CO\nh,not-a-smiles\ni,CCO\nj,CCCC(=O)O\n",
    )
    .unwrap();
    let cfg = RunConfig {
        reactants: Some(input),
        stages: Stages::only("filter").unwrap(),
        ..RunConfig::default()
    };
    let run = run_pipeline(&cfg, dir.path()).unwrap();
    assert_eq!(run.manifests.len(), 1);
    let m = &run.manifests[0];
    assert_eq!(m.counts["in"], json!(10));
    let out = m.counts["out"].as_u64().unwrap();
    assert!(out <= 10);
    // alcohols a, g; chloride b; acids c, j. Duplicate i, benzene, cyclobutane, hexane, bad SMILES dropped.
    assert_eq!(out, 5);
    assert_eq!(m.counts["parse_errors"], json!(1));
    assert_eq!(m.inputs.len(), 1);
}

#[test]
fn missing_input_fails_with_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        stages: Stages::only("screen").unwrap(),
        ..RunConfig::default()
    };
    let err = run_pipeline(&cfg, dir.path()).unwrap_err();
    assert!(matches!(err, PipelineError::Stage { ref stage, .. } if stage == "screen"));
    let m: Manifest =
        serde_json::from_slice(&std::fs::read(dir.path().join("manifests/screen.json")).unwrap()).unwrap();
    assert_eq!(m.status, "failed");
    assert!(m.error.unwrap().contains("library.csv"));
}

#[test]
fn config_file_paths_resolve_relative_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.json");
    std::fs::write(&path, r#"{"seed": 5, "reactants": "mols.csv", "shard": "2/3"}"#).unwrap();
    let cfg = RunConfig::from_file(&path).unwrap();
    assert_eq!(cfg.reactants.clone().unwrap(), dir.path().join("mols.csv"));
    assert_eq!(cfg.shard_spec().unwrap(), Shard { index: 1, count: 3 });
    std::fs::write(&path, r#"{"shard": "4/3"}"#).unwrap();
    assert!(matches!(RunConfig::from_file(&path), Err(PipelineError::Config(_))));
    std::fs::write(&path, r#"{"sed": 1}"#).unwrap();
    assert!(matches!(RunConfig::from_file(&path), Err(PipelineError::Config(_))));
}

#[test]
fn bench_on_empty_library_reports_zero() {
    let teacher = crate::surrogate::table::tests::tiny_teacher(1);
    let lib = DemoLibrary {
        sets: ReactantSets::default(),
        purchasables: Vec::new(),
    };
    let table = library_lookup(&lib, &teacher).unwrap();
    let model = SurrogateModel::new(teacher.latent_dim(), 0.01, teacher.provenance(), 0).unwrap();
    let report = bench(&lib, &teacher, &model, &table, 100).unwrap();
    assert_eq!(report.stages.len(), 4);
    for s in &report.stages {
        assert_eq!(s.molecules, 0);
        assert_eq!(s.per_second, 0.0);
    }
}

#[test]
fn bench_reports_positive_throughput() {
    let dir = tempfile::tempdir().unwrap();
    run_pipeline(&small_config(2), dir.path()).unwrap();
    let report = bench::bench_run(dir.path(), 1000).unwrap();
    for s in &report.stages {
        assert_eq!(s.molecules, 80);
        assert!(s.per_second > 0.0, "{s:?}");
    }
}
