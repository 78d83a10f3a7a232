use ehrner_core::corpus::{generate_synthetic_corpus, tokenize, SynthSpec};
use ehrner_core::repr::{
    encode, pretrain_contextual, train_static_embeddings, ContextualEncoder, EncoderShape, LossKind, PretrainConfig,
    SkipGramConfig, StaticEmbeddingTable,
};
use ehrner_core::{Error, FormatError};

fn small_table(corpus: &[String], dim: usize) -> StaticEmbeddingTable {
    train_static_embeddings(
        corpus,
        &SkipGramConfig {
            dim,
            min_count: 1,
            epochs: 2,
            ..SkipGramConfig::default()
        },
    )
    .unwrap()
}

fn pretrain_config(dim: usize, epochs: usize, seed: u64) -> PretrainConfig {
    PretrainConfig {
        encoder: EncoderShape { dim, depth: 2, window: 1 },
        epochs,
        patience: epochs,
        seed,
        ..PretrainConfig::default()
    }
}

#[test]
fn degenerate_corpus_is_learned_quickly() {
    let corpus = vec!["pyrexia".to_string(); 400];
    let table = small_table(&corpus, 16);
    for loss in [LossKind::Cosine, LossKind::L2] {
        let cfg = PretrainConfig {
            loss,
            ..pretrain_config(16, 20, 1)
        };
        let (_, report) = pretrain_contextual(&corpus, &table, &cfg).unwrap();
        assert!(report.epoch_losses.len() <= 20);
        let last = *report.epoch_losses.last().unwrap();
        assert!(last < 0.01, "{loss:?}: final loss {last} ({:?})", report.epoch_losses);
    }
}

#[test]
fn pretraining_loss_falls_on_synthetic_text() {
    let corpus = generate_synthetic_corpus(&SynthSpec::clinical(50, 600, 1.0, 3)).unwrap().raw;
    let table = small_table(&corpus, 16);
    for seed in 0..5 {
        let (_, report) = pretrain_contextual(&corpus, &table, &pretrain_config(16, 10, seed)).unwrap();
        let l = &report.epoch_losses;
        assert_eq!(l.len(), 10);
        assert!(l[9] < l[0], "seed {seed}: {l:?}");
    }
}

#[test]
fn pretraining_is_deterministic() {
    let corpus = generate_synthetic_corpus(&SynthSpec::clinical(20, 200, 1.0, 4)).unwrap().raw;
    let table = small_table(&corpus, 8);
    let cfg = pretrain_config(8, 3, 9);
    let (a, ra) = pretrain_contextual(&corpus, &table, &cfg).unwrap();
    let (b, rb) = pretrain_contextual(&corpus, &table, &cfg).unwrap();
    assert_eq!(a.to_bytes(), b.to_bytes());
    assert_eq!(ra.epoch_losses, rb.epoch_losses);
}

#[test]
fn skipgram_groups_words_sharing_contexts() {
    let mut corpus = Vec::new();
    for i in 0..300 {
        let drug = ["aspirin", "ibuprofen", "naproxen"][i % 3];
        let symptom = ["fever", "cough", "nausea"][i % 3];
        corpus.push(format!("patient was given {drug} tablets twice daily"));
        corpus.push(format!("patient complained of {symptom} since yesterday evening"));
    }
    let table = train_static_embeddings(
        &corpus,
        &SkipGramConfig {
            dim: 16,
            epochs: 5,
            min_count: 1,
            seed: 3,
            ..SkipGramConfig::default()
        },
    )
    .unwrap();
    let same = table.cosine("aspirin", "ibuprofen");
    let other = table.cosine("aspirin", "fever");
    assert!(same > other, "cos(aspirin, ibuprofen) = {same}, cos(aspirin, fever) = {other}");
    assert!(table.is_normalized());
    assert!(table.contains("Aspirin"));
    assert!(!table.contains("paracetamol"));
    assert_eq!(table.lookup("paracetamol"), table.row(table.unk_index()));
}

#[test]
fn min_count_sends_rare_words_to_unk() {
    let corpus: Vec<String> = (0..5).map(|i| format!("common words rare{i}")).collect();
    let table = train_static_embeddings(
        &corpus,
        &SkipGramConfig {
            dim: 4,
            min_count: 2,
            ..SkipGramConfig::default()
        },
    )
    .unwrap();
    assert!(table.contains("common"));
    assert!(!table.contains("rare0"));
    assert!(train_static_embeddings(&[], &SkipGramConfig::default()).is_err());
}

#[test]
fn encoder_output_is_local() {
    let corpus = vec!["a b c d e f g h i j k l".to_string()];
    let table = small_table(&corpus, 8);
    let shape = EncoderShape { dim: 8, depth: 2, window: 1 };
    let enc = ContextualEncoder::new(shape, 5).unwrap();
    let radius = shape.receptive_radius();
    let base = tokenize("a b c d e f g h i j k l");
    let changed = tokenize("a b c d e f g h i j k zebra");
    let x = encode(&enc, &table, &base).unwrap();
    let y = encode(&enc, &table, &changed).unwrap();
    assert_eq!(x.len(), base.len());
    assert!(x.iter().all(|v| v.len() == 8));
    let last = base.len() - 1;
    for i in 0..base.len() {
        if last - i > radius {
            assert_eq!(x[i], y[i], "position {i} is outside the receptive field");
        }
    }
    assert_ne!(x[last], y[last]);
    assert!(encode(&enc, &table, &[]).unwrap().is_empty());
    assert!(matches!(
        encode(&enc, &small_table(&corpus, 4), &base),
        Err(Error::DimMismatch { .. })
    ));
}

#[test]
fn table_and_encoder_round_trip() {
    let corpus = generate_synthetic_corpus(&SynthSpec::clinical(10, 100, 1.0, 1)).unwrap().raw;
    let table = small_table(&corpus, 8);
    let bytes = table.to_bytes();
    assert_eq!(StaticEmbeddingTable::from_bytes(&bytes).unwrap(), table);
    let enc = ContextualEncoder::new(EncoderShape { dim: 8, depth: 2, window: 1 }, 2).unwrap();
    let eb = enc.to_bytes();
    assert_eq!(ContextualEncoder::from_bytes(&eb).unwrap(), enc);
    assert!(ContextualEncoder::from_bytes_expecting(&eb, 16).is_err());

    // Wrong magic, truncation and trailing bytes are all rejected.
    assert!(matches!(
        StaticEmbeddingTable::from_bytes(&eb),
        Err(Error::Format(FormatError::BadMagic))
    ));
    for cut in [0, 3, 8, bytes.len() / 2, bytes.len() - 1] {
        assert!(StaticEmbeddingTable::from_bytes(&bytes[..cut]).is_err(), "cut at {cut}");
    }
    let mut long = eb.clone();
    long.push(0);
    assert!(ContextualEncoder::from_bytes(&long).is_err());
    let mut newer = bytes.clone();
    newer[4] = 99;
    assert!(matches!(
        StaticEmbeddingTable::from_bytes(&newer),
        Err(Error::Format(FormatError::UnsupportedVersion { .. }))
    ));
}
