use uttgenre_core::corpus::Label;
use uttgenre_core::features::{Feature, FeatureTable};
use uttgenre_core::genre::{enumerate_combos, mine, ComboGroup, MiningConfig, Thresholds};
use uttgenre_core::kmeans::KMeansConfig;
use uttgenre_core::synth::{generate, PlantSpec};

#[test]
fn eighteen_combinations() {
    let combos = enumerate_combos();
    assert_eq!(combos.len(), 18);
    assert_eq!(combos.iter().filter(|c| c.group == ComboGroup::Means).count(), 15);
    let variation: Vec<usize> = combos.iter().filter(|c| c.group == ComboGroup::Variation).map(|c| c.dim()).collect();
    assert_eq!(variation, [2, 2, 4]);
    for c in &combos {
        let pitch = c.features.contains(&Feature::PitchStd);
        assert_eq!(pitch, c.features.contains(&Feature::PitchIqr));
    }
    let mut names: Vec<String> = combos.iter().map(|c| c.name()).collect();
    names.sort();
    names.dedup();
    assert_eq!(names.len(), 18);
}

#[test]
fn default_sweep_has_342_trials() {
    assert_eq!(MiningConfig::default().trial_count(), 342);
    let mut cfg = MiningConfig::default();
    cfg.thresholds.n_max = 5;
    assert_eq!(cfg.trial_count(), 72);
}

fn quick(n_max: usize) -> MiningConfig {
    MiningConfig {
        thresholds: Thresholds { n_max, ..Thresholds::default() },
        kmeans: KMeansConfig { restarts: 1, record_history: false, ..KMeansConfig::default() },
        ..MiningConfig::default()
    }
}

#[test]
fn planted_genre_is_found() {
    let spec = PlantSpec::standard();
    let (corpus, truth) = generate(&spec, 21).unwrap();
    let table = FeatureTable::from_corpus(&corpus, false).unwrap();
    assert!(table.sessions.iter().all(|s| s.label != Label::Excluded));
    let out = mine(&table, &quick(8)).unwrap();
    assert_eq!(out.trials, 18 * 7);
    let (combo, pattern) = spec.plants[0].key(3);
    let centre = spec.plants[0].center;
    let hit = out.salient.genres.iter().find(|g| g.combo_index == combo && g.pattern == pattern);
    let g = hit.expect("planted genre is salient");
    assert!(g.correlation.unwrap().rho < 0.0);
    assert!(g.aggregated_range[0].contains(centre));
    assert_eq!(truth.plants[0].combo_index, combo);
}

#[test]
fn salient_genres_pass_every_threshold() {
    let (corpus, _) = generate(&PlantSpec::standard(), 4).unwrap();
    let table = FeatureTable::from_corpus(&corpus, false).unwrap();
    let cfg = quick(6);
    let out = mine(&table, &cfg).unwrap();
    for g in &out.candidates {
        if cfg.thresholds.is_salient(g) {
            assert!(g.occurrence_ratio > 0.5 && g.mean_contribution > 0.05);
            assert!(out.salient.genres.iter().any(|s| s.combo_index == g.source.combo_index && s.pattern == g.pattern));
        }
    }
    for s in &out.salient.genres {
        for r in &s.aggregated_range {
            assert!(r.min <= r.max);
        }
    }
    let strict = Thresholds { rf_min: 1.0, ..cfg.thresholds.clone() };
    assert!(out.candidates.iter().all(|g| !strict.is_salient(g)));
}

#[test]
fn mining_is_reproducible() {
    let (corpus, _) = generate(&PlantSpec::standard(), 8).unwrap();
    let table = FeatureTable::from_corpus(&corpus, false).unwrap();
    assert_eq!(mine(&table, &quick(4)).unwrap(), mine(&table, &quick(4)).unwrap());
}
