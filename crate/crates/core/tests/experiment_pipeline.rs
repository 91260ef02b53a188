use abrsim::experiment::{
    compare, evaluate, run_training, Corpus, ExperimentConfig, PolicySpec, Split,
};

fn small_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.corpus.num_videos = 8;
    cfg.corpus.num_traces = 8;
    cfg.corpus.min_chunks = 30;
    cfg.corpus.max_chunks = 60;
    cfg.corpus.trace_duration_s = 200;
    cfg.eval.seeds = 4;
    cfg
}

#[test]
fn corpus_bytes_are_a_function_of_the_seed() {
    let cfg = small_config();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    Corpus::generate(&cfg).unwrap().write(a.path()).unwrap();
    Corpus::generate(&cfg).unwrap().write(b.path()).unwrap();
    for entry in std::fs::read_dir(a.path().join("traces")).unwrap() {
        let name = entry.unwrap().file_name();
        assert_eq!(
            std::fs::read(a.path().join("traces").join(&name)).unwrap(),
            std::fs::read(b.path().join("traces").join(&name)).unwrap()
        );
    }
    assert_eq!(
        std::fs::read(a.path().join("corpus.json")).unwrap(),
        std::fs::read(b.path().join("corpus.json")).unwrap()
    );
}

#[test]
fn training_improves_on_the_initial_policy() {
    let mut cfg = small_config();
    cfg.train.agent.episodes = 3000;
    let corpus = Corpus::generate(&cfg).unwrap();
    let run = run_training(&cfg, &corpus).unwrap();
    let qoe: Vec<f64> = run.curve.iter().map(|s| s.qoe.unwrap()).collect();
    let head = qoe[..300].iter().sum::<f64>() / 300.0;
    let tail = qoe[qoe.len() - 300..].iter().sum::<f64>() / 300.0;
    assert!(tail > head, "final {tail} <= initial {head}");
    assert!(run.curve.last().unwrap().entropy > 1e-3);
}

#[test]
fn evaluate_and_compare_end_to_end() {
    let mut cfg = small_config();
    cfg.train.agent.episodes = 200;
    let corpus = Corpus::generate(&cfg).unwrap();
    let agent = PolicySpec::Agent {
        label: "agent".into(),
        checkpoint: run_training(&cfg, &corpus).unwrap().checkpoint,
    };
    let reports: Vec<_> = [PolicySpec::Baseline("bdash".into()), PolicySpec::Baseline("greedy".into()), agent]
        .iter()
        .map(|spec| evaluate(&cfg, &corpus, spec).unwrap())
        .collect();
    for r in &reports {
        assert_eq!(r.split, Split::Test);
        assert_eq!(r.config_hash, cfg.hash());
        assert_eq!(r.episodes.len(), 4 * 4);
        assert!(r.std_qoe >= 0.0);
    }
    let table = compare(&reports).unwrap();
    assert_eq!(table.rows.len(), 3);
    assert_eq!(table.improvements.len(), 6);

    let mut other = cfg.clone();
    other.qoe = abrsim::qoe::QoeWeights::STANDARD[2];
    let odd = evaluate(&other, &corpus, &PolicySpec::Baseline("bdash".into())).unwrap();
    assert!(compare(&[reports[0].clone(), odd]).is_err());
}
