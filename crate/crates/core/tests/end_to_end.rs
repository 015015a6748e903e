//! Fixture corpus through synthesis, the on-disk layout and replay.

use tamperkit::dataset::{generate_fixture_corpus, load_annotations, load_image, read_sample, write_sample};
use tamperkit::model::{ParameterTable, PopulationModel};
use tamperkit::pipeline::{replay_sample, synthesize_sample, SourceImage, SynthRequest};

#[test]
fn stored_samples_replay_from_the_fixture_files() {
    let dir = tempfile::tempdir().unwrap();
    let files = generate_fixture_corpus(&dir.path().join("fx"), 4, 8).unwrap();
    let sources: Vec<SourceImage> = files
        .iter()
        .map(|f| {
            let image = load_image(&f.image).unwrap();
            let regions = load_annotations(&f.annotations, image.width(), image.height()).unwrap();
            SourceImage { name: f.name.clone(), image, regions }
        })
        .collect();
    let table = ParameterTable::default_table();
    let model = PopulationModel::from_table(&table).unwrap();
    let out = dir.path().join("ds");
    for i in 0..6 {
        let src = &sources[i % sources.len()];
        let id = format!("s{i:06}");
        let req = SynthRequest {
            image_name: &src.name,
            original: &src.image,
            regions: &src.regions,
            sources: &sources,
            model: &model,
            table: &table,
            seed: 13,
            sample_id: &id,
            record_timings: false,
        };
        let s = synthesize_sample(&req).unwrap();
        write_sample(&out, &id, &s.tampered, &s.mask, &s.record, false).unwrap();
        assert!(write_sample(&out, &id, &s.tampered, &s.mask, &s.record, false).is_err());

        let stored = read_sample(&out, &id).unwrap();
        assert_eq!(stored.tampered, s.tampered);
        assert_eq!(stored.mask, s.mask);
        let (img, mask) = replay_sample(&stored.record, &src.image, &sources).unwrap();
        assert_eq!(img, stored.tampered, "{id}");
        assert_eq!(mask, stored.mask, "{id}");
    }
}
