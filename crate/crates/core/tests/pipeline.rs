use scidfm_core::lens::{cluster_report, collect_profiles, tsne_reduce, LabeledTokens, Pooling, TsneConfig};
use scidfm_core::model::{ModelConfig, Params};
use scidfm_core::synth::{labeled_corpus, Domain};
use scidfm_core::tokenizer::{encode_marked, train_bpe, Document, Identifiers};
use scidfm_core::train::{train, TrainConfig};
use scidfm_core::Exec;

#[test]
fn molecules_and_prose_separate() {
    let ids = Identifiers::default();
    let corpus = labeled_corpus(&[Domain::Math, Domain::Molecule], 60, 11);
    let docs: Vec<Document> = corpus.iter().map(|d| Document::parse_marked(&d.text, &ids).unwrap()).collect();
    let vocab = train_bpe(&docs, 512).unwrap();
    let mut cfg = ModelConfig::tiny();
    cfg.vocab_size = vocab.size();
    let encoded: Vec<LabeledTokens> = corpus
        .iter()
        .map(|d| LabeledTokens { label: d.label.clone(), tokens: encode_marked(&d.text, &vocab).unwrap().ids })
        .collect();
    // Interleave documents so every batch mixes domains.
    let mut stream = Vec::new();
    for i in 0..60 {
        for j in [i, 60 + i] {
            stream.extend(&encoded[j].tokens);
            stream.push(vocab.end_of_doc_id());
        }
    }
    let tcfg = TrainConfig { lr_init: 3e-3, total_steps: 200, batch_tokens: 128, seq_len: 32, ..TrainConfig::default() };
    let mut params = Params::init(&cfg, 0).unwrap();
    let out = train(&mut params, &cfg, stream.iter().copied().cycle(), &tcfg, Exec::default()).unwrap();
    assert!(out.history.last().unwrap().lm_loss < out.history[0].lm_loss);
    let set = collect_profiles(&params, &cfg, &encoded, Pooling::Sum, Exec::default()).unwrap();
    let x = set.vectors();
    let labels = set.labels();
    let emb = tsne_reduce(&x, &TsneConfig::default()).unwrap();
    let r = cluster_report(&x, &labels, Some(&emb.coords)).unwrap();
    assert!(r.inter_mean > r.intra_mean);
    assert!(r.silhouette_embedding.unwrap() > 0.0);
}
