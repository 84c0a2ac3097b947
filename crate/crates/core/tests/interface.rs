//! The public surface compiles for both scalar widths and rejects bad
//! input with the documented error variants.

use rwal::acquisition::{aggregate, score_lc};
use rwal::corpus::{parse_conll_str, BioPolicy, LabeledSentence, ParseOptions};
use rwal::metrics::imbalance_ratio;
use rwal::reweight::{compute_weights, reweighted_query, ImportedProbs, QueryOptions};
use rwal::{
    AcquisitionKind, ClassWeights32, Error, ExperimentConfig, LabeledCorpus, ProbMatrix32, Sentence, TagSet,
    TokenScores32,
};

#[test]
fn single_precision_path() {
    let ts = TagSet::from_entity_types(&["A"]).unwrap();
    let m = ProbMatrix32::from_rows(&[vec![0.5, 0.25, 0.25]]).unwrap();
    let tokens: TokenScores32 = score_lc(&m);
    let weights = ClassWeights32::uniform(ts.len());
    assert_eq!(aggregate(&tokens, Some(&weights)).unwrap(), 0.5);
}

#[test]
fn unsmoothed_weights_name_the_missing_class() {
    let ts = TagSet::from_entity_types(&["PER", "LOC"]).unwrap();
    let corpus = LabeledCorpus::new(
        ts.clone(),
        vec![LabeledSentence::new(Sentence::new(0, ["a", "b"]).unwrap(), vec![0, ts.index_of("B-PER").unwrap()]).unwrap()],
    )
    .unwrap();
    match compute_weights::<f64>(&corpus, 0.0) {
        Err(Error::AbsentClass { class }) => assert_eq!(class, "I-PER"),
        other => panic!("{other:?}"),
    }
    assert!(compute_weights::<f64>(&corpus, -1.0).unwrap_err().is_config_error());
    assert!(compute_weights::<f64>(&LabeledCorpus::empty(ts), 0.1).is_err());
}

#[test]
fn random_cannot_be_reweighted() {
    let pool = vec![Sentence::new(0, ["x"]).unwrap()];
    let source = ImportedProbs::<f64>::default();
    let w = rwal::ClassWeights::uniform(3);
    let err = reweighted_query(&pool, &source, AcquisitionKind::Random, &w, 1, &QueryOptions::default()).unwrap_err();
    assert!(err.is_config_error());
    let config = ExperimentConfig { reweight: true, acquisition: AcquisitionKind::Random, ..ExperimentConfig::default() };
    assert!(config.validate().unwrap_err().is_config_error());
}

#[test]
fn undefined_imbalance_ratio_reports_the_class() {
    assert!(matches!(imbalance_ratio(&[3, 0, 2]), Err(Error::GammaUndefined { index: 1 })));
}

#[test]
fn strict_parsing_lists_every_violation() {
    let text = "a O\nb I-PER\n\nc B-LOC\nd I-PER\n";
    let options = ParseOptions { bio: BioPolicy::Strict, ..ParseOptions::default() };
    match parse_conll_str(text, &options) {
        Err(Error::InvalidBio(v)) => assert_eq!(v.iter().map(|x| x.line).collect::<Vec<_>>(), vec![2, 5]),
        other => panic!("{other:?}"),
    }
    let repaired = parse_conll_str(text, &ParseOptions::default()).unwrap();
    assert_eq!(repaired.repairs.len(), 2);
}

#[test]
fn acquisition_names_parse() {
    for kind in AcquisitionKind::ALL {
        assert_eq!(kind.to_string().parse::<AcquisitionKind>().unwrap(), kind);
    }
    assert!("margin".parse::<AcquisitionKind>().unwrap_err().is_config_error());
}
