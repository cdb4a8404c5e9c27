use scidfm_core::model::{ModelConfig, Params};
use scidfm_core::synth::pattern_text;
use scidfm_core::tokenizer::{encode, train_bpe, Document, ReservedTables, Vocabulary};
use scidfm_core::train::{cosine_lr, read_history_csv, train, write_history_csv, TrainConfig};
use scidfm_core::Exec;

fn pattern_setup() -> (Vocabulary, Vec<u32>, ModelConfig) {
    let text = pattern_text("ab", 2048);
    let doc = Document::prose(text.clone());
    let vocab = train_bpe(&[doc.clone()], ReservedTables::default().count() + 2).unwrap();
    let ids = encode(&doc, &vocab).unwrap().ids;
    assert_eq!(ids.len(), 2048);
    let mut cfg = ModelConfig::tiny();
    cfg.vocab_size = vocab.size();
    (vocab, ids, cfg)
}

fn pattern_train_config(steps: usize) -> TrainConfig {
    TrainConfig {
        lr_init: 3e-3,
        total_steps: steps,
        batch_tokens: 128,
        seq_len: 32,
        ..TrainConfig::default()
    }
}

fn moving_average(xs: &[f64], w: usize, end: usize) -> f64 {
    xs[end - w..end].iter().sum::<f64>() / w as f64
}

#[test]
fn pattern_corpus_is_learned() {
    let (_, ids, cfg) = pattern_setup();
    let tcfg = pattern_train_config(500);
    let mut params = Params::init(&cfg, tcfg.seed).unwrap();
    let stream = ids.iter().copied().cycle();
    let out = train(&mut params, &cfg, stream, &tcfg, Exec::default()).unwrap();
    assert!(!out.exhausted);
    let lm: Vec<f64> = out.history.iter().map(|r| r.lm_loss).collect();
    let ln_v = (cfg.vocab_size as f64).ln();
    assert!((lm[0] - ln_v).abs() < 0.3, "initial loss {} vs ln V {ln_v}", lm[0]);
    assert!(*lm.last().unwrap() < 0.1 * ln_v, "final loss {}", lm.last().unwrap());
    assert!(moving_average(&lm, 50, 500) < moving_average(&lm, 50, 50));
}

#[test]
fn same_seed_same_history() {
    let (_, ids, cfg) = pattern_setup();
    let tcfg = pattern_train_config(20);
    let run = |exec| {
        let mut p = Params::init(&cfg, 7).unwrap();
        let h = train(&mut p, &cfg, ids.iter().copied().cycle(), &tcfg, exec).unwrap().history;
        (write_history_csv(&h), p)
    };
    let (a, pa) = run(Exec::Sequential);
    let (b, pb) = run(Exec::Parallel);
    assert_eq!(a, b);
    assert_eq!(pa, pb);
    let parsed = read_history_csv(&a).unwrap();
    assert_eq!(write_history_csv(&parsed), a);
}

#[test]
fn zero_learning_rate_leaves_weights_alone() {
    let (_, ids, cfg) = pattern_setup();
    let tcfg = TrainConfig {
        lr_init: 0.0,
        ..pattern_train_config(10)
    };
    let init = Params::init(&cfg, 1).unwrap();
    let mut p = init.clone();
    let out = train(&mut p, &cfg, ids.iter().copied().cycle(), &tcfg, Exec::default()).unwrap();
    assert_eq!(p, init);
    let first = out.history[0].lm_loss;
    assert!(out.history.iter().all(|r| r.lm_loss == first && r.lr == 0.0));
}

#[test]
fn short_stream_stops_cleanly() {
    let (_, ids, cfg) = pattern_setup();
    let tcfg = pattern_train_config(100);
    let mut p = Params::init(&cfg, 1).unwrap();
    // 2048 tokens fill 16 batches of 128.
    let out = train(&mut p, &cfg, ids.iter().copied(), &tcfg, Exec::default()).unwrap();
    assert!(out.exhausted);
    assert_eq!(out.history.len(), 16);
}

#[test]
fn two_epoch_schedule_chains() {
    let (_, ids, cfg) = pattern_setup();
    let base = pattern_train_config(10);
    let [first, second] = TrainConfig::two_epochs(&base);
    assert_eq!((first.lr_init, second.lr_init), (3e-4, 3e-5));
    let mut p = Params::init(&cfg, 2).unwrap();
    let a = train(&mut p, &cfg, ids.iter().copied().cycle(), &first, Exec::default()).unwrap();
    let b = train(&mut p, &cfg, ids.iter().copied().cycle(), &second, Exec::default()).unwrap();
    assert_eq!(a.history.len() + b.history.len(), 20);
    assert_eq!(cosine_lr(10, &second).unwrap(), 0.1 * 3e-5);
}
