use std::io::Write;

use pedagogy::{load_config, AppConfig, Error};

#[test]
fn loads_partial_file() {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    write!(
        f,
        r#"{{"experiment": {{"episodes": 1000, "eval_period": 100}}, "output_dir": "results"}}"#
    )
    .unwrap();
    let cfg = load_config(f.path()).unwrap();
    assert_eq!(cfg.experiment.episodes, 1000);
    assert_eq!(cfg.output_dir.to_str(), Some("results"));
    assert_eq!(cfg.tutor, AppConfig::default().tutor);
}

#[test]
fn missing_file_is_an_io_error() {
    let err = load_config(std::path::Path::new("/no/such/config.json")).unwrap_err();
    assert!(matches!(err, Error::Io { .. }));
    assert!(err.to_string().contains("/no/such/config.json"));
}

#[test]
fn malformed_json_is_a_parse_error() {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    write!(f, "{{ not json").unwrap();
    assert!(matches!(
        load_config(f.path()).unwrap_err(),
        Error::ConfigParse(_)
    ));
}
