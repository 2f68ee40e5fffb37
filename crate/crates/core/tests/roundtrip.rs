use era_gbdt::gbdt::FORMAT_VERSION;
use era_gbdt::synth::{gen_sine_wave, SineWaveSpec};
use era_gbdt::{fit, load_dataset, load_model, save_model, Alpha, Error, SplitType, TrainConfig};

fn config(split_type: SplitType) -> TrainConfig {
    TrainConfig {
        split_type,
        boltzmann_alpha: Alpha::Finite(-1.0),
        n_boosting_rounds: 20,
        max_leaves: 8,
        min_child_samples: 5,
        max_bins: 16,
        colsample_bytree: 1.0,
        random_seed: 3,
        ..TrainConfig::default()
    }
}

#[test]
fn saved_models_predict_identically() {
    let data = gen_sine_wave(&SineWaveSpec { seed: 2, ..Default::default() }).unwrap();
    let dir = tempfile::tempdir().unwrap();
    for st in SplitType::ALL {
        let model = fit(&data.train, &config(st)).unwrap();
        let path = dir.path().join(format!("{st}.json"));
        save_model(&model, &path).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(loaded, model);
        let a = model.predict_dataset(&data.test).unwrap();
        let b = loaded.predict_dataset(&data.test).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}

#[test]
fn csv_round_trip_keeps_rows_and_era_ids() {
    let data = gen_sine_wave(&SineWaveSpec { seed: 4, ..Default::default() }).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("test.csv");
    data.test.save_csv(&path, "era", "target").unwrap();
    let back = load_dataset(&path, "era", "target").unwrap();
    assert_eq!(back, data.test);
    assert_eq!(back.era_labels(), &[8]);

    let path = dir.path().join("train.csv");
    data.train.save_csv(&path, "era", "target").unwrap();
    assert_eq!(load_dataset(&path, "era", "target").unwrap(), data.train);
}

#[test]
fn damaged_model_files_are_rejected() {
    let data = gen_sine_wave(&SineWaveSpec::default()).unwrap();
    let model = fit(&data.train, &config(SplitType::EraSplit)).unwrap();
    let text = model.to_json().unwrap();
    let dir = tempfile::tempdir().unwrap();

    let path = dir.path().join("cut.json");
    std::fs::write(&path, &text[..text.len() / 2]).unwrap();
    assert!(matches!(load_model(&path), Err(Error::ModelParse { .. })));

    let path = dir.path().join("future.json");
    let bumped = text.replacen(
        &format!("\"format_version\": {FORMAT_VERSION}"),
        "\"format_version\": 999",
        1,
    );
    assert_ne!(bumped, text);
    std::fs::write(&path, bumped).unwrap();
    assert!(matches!(load_model(&path), Err(Error::UnsupportedVersion { .. })));
}

#[test]
fn prediction_checks_dimensions() {
    let data = gen_sine_wave(&SineWaveSpec::default()).unwrap();
    let model = fit(&data.train, &config(SplitType::Original)).unwrap();
    let wide = vec![vec![0.0; 3], vec![0.0; 3]];
    assert!(matches!(model.predict(&wide), Err(Error::DimensionMismatch { expected: 1, got: 2 })));
}
