//! PLY, embedding-table, manifest and checkpoint round trips and corrupt inputs.

use gsalign::assets::{
    gen_synthetic_triplets, load_manifest, parse_ply, read_ply, subsample_points, write_ply,
    AssetError, EmbeddingTable, FixtureSpec, GaussianCloud, GaussianPoint, ManifestEntry,
    TripletManifest, ATTRIBUTE_NAMES,
};
use gsalign::encoder::{
    load_model, save_model, Checkpoint, EncoderConfig, EncoderError, GaussianEncoder, ModelConfig,
    NamedTensor, Preset,
};
use gsalign::params::ParamSet;
use gsalign::tokenizer::TokenizerConfig;
use proptest::prelude::*;
use serde_json::json;

fn finite() -> impl Strategy<Value = f32> {
    prop::num::f32::NORMAL | prop::num::f32::ZERO | prop::num::f32::SUBNORMAL
}

fn point_strategy() -> impl Strategy<Value = GaussianPoint> {
    prop::collection::vec(finite(), 14)
        .prop_map(|v| GaussianPoint::from_array(&v.try_into().unwrap()))
}

proptest! {
    #[test]
    fn ply_round_trip_is_bit_exact(points in prop::collection::vec(point_strategy(), 1..40)) {
        let cloud = GaussianCloud::new("p", points).unwrap();
        let back = parse_ply(&write_ply(&cloud)).unwrap();
        prop_assert_eq!(back.len(), cloud.len());
        for (a, b) in cloud.to_rows().iter().zip(back.to_rows()) {
            prop_assert_eq!(a.map(f32::to_bits), b.map(f32::to_bits));
        }
    }
}

#[test]
fn fixture_clouds_round_trip_through_files() {
    let spec = FixtureSpec {
        classes: 2,
        per_class: 2,
        views: 3,
        dim: 8,
        points: 3,
        ..Default::default()
    };
    let set = gen_synthetic_triplets(&spec).unwrap();
    let dir = tempfile::tempdir().unwrap();
    set.write_to(dir.path()).unwrap();
    let manifest = load_manifest(dir.path().join("manifest.json")).unwrap();
    assert_eq!(manifest.len(), 4);
    assert!(manifest.entries.iter().all(|e| e.image_keys.len() == 3));
    manifest.check_assets().unwrap();
    for (i, cloud) in set.clouds.iter().enumerate() {
        let back = read_ply(manifest.asset_path(i)).unwrap();
        assert_eq!(back.len(), 3);
        assert_eq!(back.to_rows(), cloud.to_rows());
    }
    let table = EmbeddingTable::load(dir.path().join("embeddings.gseb")).unwrap();
    manifest.validate_against(&table).unwrap();

    let again = tempfile::tempdir().unwrap();
    gen_synthetic_triplets(&spec)
        .unwrap()
        .write_to(again.path())
        .unwrap();
    for name in ["embeddings.gseb", "classes.gseb", "manifest.json"] {
        assert_eq!(
            std::fs::read(dir.path().join(name)).unwrap(),
            std::fs::read(again.path().join(name)).unwrap()
        );
    }
}

fn header(lines: &[&str]) -> Vec<u8> {
    let mut s = String::from("ply\nformat binary_little_endian 1.0\n");
    for l in lines {
        s.push_str(l);
        s.push('\n');
    }
    s.push_str("end_header\n");
    s.into_bytes()
}

fn full_header(count: usize) -> Vec<String> {
    let mut v = vec![format!("element vertex {count}")];
    v.extend(
        ATTRIBUTE_NAMES
            .iter()
            .map(|n| format!("property float {n}")),
    );
    v
}

fn valid_blob(count: usize) -> Vec<u8> {
    let lines = full_header(count);
    let mut b = header(&lines.iter().map(String::as_str).collect::<Vec<_>>());
    for i in 0..count * 14 {
        b.extend_from_slice(&(i as f32 * 0.5).to_le_bytes());
    }
    b
}

#[test]
fn extra_properties_and_elements_are_skipped() {
    // Reordered required properties plus a double, a uchar and a face element.
    let mut lines = vec![
        "comment made by hand".to_string(),
        "element vertex 2".into(),
        "property double nx".into(),
    ];
    for n in ATTRIBUTE_NAMES.iter().rev() {
        lines.push(format!("property float {n}"));
    }
    lines.push("property uchar flag".into());
    lines.push("element face 1".into());
    lines.push("property int id".into());
    let mut blob = header(&lines.iter().map(String::as_str).collect::<Vec<_>>());
    for v in 0..2 {
        blob.extend_from_slice(&(99.0f64).to_le_bytes());
        for i in (0..14).rev() {
            blob.extend_from_slice(&((v * 14 + i) as f32).to_le_bytes());
        }
        blob.push(7);
    }
    blob.extend_from_slice(&5i32.to_le_bytes());
    let cloud = parse_ply(&blob).unwrap();
    assert_eq!(cloud.len(), 2);
    for (v, row) in cloud.to_rows().iter().enumerate() {
        for (i, x) in row.iter().enumerate() {
            assert_eq!(*x, (v * 14 + i) as f32);
        }
    }
}

#[test]
fn corrupt_ply_diagnostics() {
    let good = valid_blob(3);
    assert_eq!(parse_ply(&good).unwrap().len(), 3);

    let short = &good[..good.len() - 5];
    assert!(matches!(
        parse_ply(short),
        Err(AssetError::SizeMismatch { expected, actual }) if expected == 3 * 56 && actual == 3 * 56 - 5
    ));

    let mut long = good.clone();
    long.push(0);
    assert!(matches!(
        parse_ply(&long),
        Err(AssetError::SizeMismatch { .. })
    ));

    let lines = full_header(1);
    let without: Vec<&str> = lines
        .iter()
        .map(String::as_str)
        .filter(|l| !l.ends_with("rot_2"))
        .collect();
    let mut blob = header(&without);
    blob.extend_from_slice(&[0u8; 13 * 4]);
    match parse_ply(&blob) {
        Err(AssetError::MissingProperty(p)) => assert_eq!(p, "rot_2"),
        other => panic!("expected missing rot_2, got {other:?}"),
    }

    let mut blob = b"ply\nformat ascii 1.0\n".to_vec();
    blob.extend_from_slice(&good[b"ply\nformat binary_little_endian 1.0\n".len()..]);
    match parse_ply(&blob) {
        Err(AssetError::Header { line, content, .. }) => {
            assert_eq!(line, 2);
            assert_eq!(content, "format ascii 1.0");
        }
        other => panic!("expected header error, got {other:?}"),
    }

    let mut blob = b"ply\nformat binary_little_endian 1.0\nelement vertex many\n".to_vec();
    blob.extend_from_slice(b"end_header\n");
    assert!(matches!(
        parse_ply(&blob),
        Err(AssetError::Header { line: 3, .. })
    ));

    assert!(matches!(
        parse_ply(b"plx\n"),
        Err(AssetError::Header { line: 1, .. })
    ));
    assert!(parse_ply(b"ply\nformat binary_little_endian 1.0\nelement vertex 1\n").is_err());
    assert!(matches!(
        parse_ply(&valid_blob(0)),
        Err(AssetError::EmptyCloud)
    ));

    let mut nan = valid_blob(1);
    let at = nan.len() - 4 * 8;
    nan[at..at + 4].copy_from_slice(&f32::NAN.to_le_bytes());
    assert!(matches!(
        parse_ply(&nan),
        Err(AssetError::NonFinite {
            index: 0,
            attribute: "opacity"
        })
    ));
}

#[test]
fn subsampling_contract() {
    let points: Vec<GaussianPoint> = (0..5)
        .map(|i| GaussianPoint::from_array(&[i as f32; 14]))
        .collect();
    let cloud = GaussianCloud::new("s", points).unwrap();
    let mut same: Vec<f32> = subsample_points(&cloud, 5, 3)
        .unwrap()
        .points()
        .iter()
        .map(|p| p.position[0])
        .collect();
    same.sort_by(f32::total_cmp);
    assert_eq!(same, vec![0.0, 1.0, 2.0, 3.0, 4.0]);

    let small = GaussianCloud::new("t", cloud.points()[..3].to_vec()).unwrap();
    let up = subsample_points(&small, 6, 1).unwrap();
    assert_eq!(up.len(), 6);
    for v in 0..3 {
        assert!(up.points().iter().any(|p| p.position[0] == v as f32));
    }

    let big: Vec<GaussianPoint> = (0..20_000)
        .map(|i| GaussianPoint::from_array(&[i as f32; 14]))
        .collect();
    let big = GaussianCloud::new("b", big).unwrap();
    let a = subsample_points(&big, 10_000, 7).unwrap();
    let b = subsample_points(&big, 10_000, 7).unwrap();
    assert_eq!(a.to_rows(), b.to_rows());
    let mut seen: Vec<u32> = a.points().iter().map(|p| p.position[0] as u32).collect();
    seen.sort_unstable();
    seen.dedup();
    assert_eq!(seen.len(), 10_000);
    assert!(matches!(
        subsample_points(&big, 0, 7),
        Err(AssetError::Argument(_))
    ));
}

fn table(dim: usize, keys: &[&str]) -> EmbeddingTable {
    let mut t = EmbeddingTable::new(dim);
    for (i, k) in keys.iter().enumerate() {
        let row: Vec<f32> = (0..dim)
            .map(|j| (i * dim + j) as f32 * 0.25 - 1.0)
            .collect();
        t.push(*k, &row).unwrap();
    }
    t
}

#[test]
fn embedding_table_round_trip_and_errors() {
    let t = table(4, &["a/text", "a/img0", "b/text", "ß/img"]);
    let bytes = t.to_bytes();
    let back = EmbeddingTable::from_bytes(&bytes).unwrap();
    assert_eq!(back.to_bytes(), bytes);
    assert_eq!(back.keys(), t.keys());
    assert_eq!(back.get("ß/img"), t.get("ß/img"));

    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(matches!(
        EmbeddingTable::from_bytes(&bad),
        Err(AssetError::BadMagic(_))
    ));
    let mut bad = bytes.clone();
    bad[4] = 9;
    assert!(matches!(
        EmbeddingTable::from_bytes(&bad),
        Err(AssetError::Version { found: 9, .. })
    ));
    assert!(matches!(
        EmbeddingTable::from_bytes(&bytes[..bytes.len() - 3]),
        Err(AssetError::Truncated(_))
    ));
    assert!(matches!(
        EmbeddingTable::from_bytes(&bytes[..10]),
        Err(AssetError::Truncated(_))
    ));

    // A final row written 2 floats short.
    let short = &bytes[..bytes.len() - 8];
    assert!(matches!(
        EmbeddingTable::from_bytes(short),
        Err(AssetError::DimensionMismatch {
            expected: 4,
            found: 2,
            ..
        })
    ));

    let mut dup = EmbeddingTable::new(2);
    dup.push("k", &[0.0, 1.0]).unwrap();
    assert!(matches!(dup.push("k", &[1.0, 0.0]), Err(AssetError::DuplicateKey(k)) if k == "k"));
    assert!(matches!(
        dup.push("wide", &[0.0; 3]),
        Err(AssetError::DimensionMismatch {
            expected: 2,
            found: 3,
            ..
        })
    ));
    let mut twice = table(2, &["k"]).to_bytes();
    let row = twice[16..].to_vec();
    twice.extend_from_slice(&row);
    twice[12..16].copy_from_slice(&2u32.to_le_bytes());
    assert!(matches!(
        EmbeddingTable::from_bytes(&twice),
        Err(AssetError::DuplicateKey(_))
    ));
}

fn entry(name: &str, views: &[&str]) -> ManifestEntry {
    ManifestEntry {
        asset: format!("{name}.ply").into(),
        text_key: format!("{name}/text"),
        image_keys: views.iter().map(|v| v.to_string()).collect(),
        label: Some("c".into()),
    }
}

#[test]
fn manifest_resolution() {
    let t = table(4, &["a/text", "a/i0", "a/i1", "b/text", "b/i0", "b/i1"]);
    let m = TripletManifest::new(
        4,
        vec![entry("a", &["a/i0", "a/i1"]), entry("b", &["b/i0", "b/i1"])],
        ".",
    )
    .unwrap();
    m.validate_against(&t).unwrap();
    assert_eq!(m.len(), 2);

    let dangling = TripletManifest::new(4, vec![entry("a", &["a/i0", "a/i9"])], ".").unwrap();
    assert!(
        matches!(dangling.validate_against(&t), Err(AssetError::DanglingKey(k)) if k == "a/i9")
    );

    let narrow = table(3, &["a/text", "a/i0", "a/i1"]);
    assert!(matches!(
        m.validate_against(&narrow),
        Err(AssetError::DimensionMismatch { .. })
    ));
    assert!(matches!(
        TripletManifest::new(4, vec![entry("a", &[])], "."),
        Err(AssetError::NoViews(0))
    ));

    let dir = tempfile::tempdir().unwrap();
    m.save(dir.path().join("m.json")).unwrap();
    assert!(matches!(
        load_manifest(dir.path().join("m.json")),
        Err(AssetError::MissingAsset { index: 0, .. })
    ));
    for name in ["a.ply", "b.ply"] {
        std::fs::write(dir.path().join(name), b"").unwrap();
    }
    let back = load_manifest(dir.path().join("m.json")).unwrap();
    assert_eq!(back.entries, m.entries);
    assert_eq!(back.asset_path(1), dir.path().join("b.ply"));
    std::fs::write(dir.path().join("bad.json"), "{\"dim\": 4").unwrap();
    assert!(matches!(
        load_manifest(dir.path().join("bad.json")),
        Err(AssetError::Manifest(_))
    ));
}

fn model_config() -> ModelConfig {
    let encoder = EncoderConfig::preset(Preset::Nano, 8);
    ModelConfig {
        tokenizer: TokenizerConfig {
            num_patches: 4,
            neighbors: 2,
            token_dim: encoder.width,
            points: 8,
            point_hidden: 8,
            conv_channels: 8,
            ..Default::default()
        },
        encoder,
    }
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let model = GaussianEncoder::<f32>::new(model_config(), 5).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.gsck");
    let extra = vec![
        NamedTensor::scalar("align/log_tau", -2.5),
        NamedTensor::scalar("trainer/step", 12.0),
    ];
    save_model(&path, &model, json!({"seed": 5}), extra.clone()).unwrap();
    let (back, report, ckpt) = load_model::<f32>(&path, 0).unwrap();
    assert!(report.warnings.is_empty());
    assert_eq!(report.extra, extra);
    assert_eq!(ckpt.config["run"]["seed"], 5);
    for (a, b) in model.params.params().iter().zip(back.params.params()) {
        assert_eq!(a.name, b.name);
        let bits = |v: &ndarray::ArrayViewD<f32>| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.value), bits(&b.value), "{}", a.name);
    }
    assert_eq!(model.bn, back.bn);
    let bytes = std::fs::read(&path).unwrap();
    assert_eq!(
        Checkpoint::from_model(&back, json!({"seed": 5}), extra).to_bytes(),
        bytes
    );
    assert_eq!(Checkpoint::from_bytes(&bytes).unwrap().to_bytes(), bytes);
}

#[test]
fn corrupt_checkpoints_are_rejected() {
    let model = GaussianEncoder::<f32>::new(model_config(), 5).unwrap();
    let bytes = Checkpoint::from_model(&model, json!({}), vec![]).to_bytes();

    let mut bad = bytes.clone();
    bad[..4].copy_from_slice(b"GSCX");
    assert!(
        matches!(Checkpoint::from_bytes(&bad), Err(EncoderError::Format(m)) if m.contains("magic"))
    );
    let mut bad = bytes.clone();
    bad[4..8].copy_from_slice(&2u32.to_le_bytes());
    assert!(matches!(
        Checkpoint::from_bytes(&bad),
        Err(EncoderError::Version {
            found: 2,
            expected: 1
        })
    ));
    for cut in [3, 9, bytes.len() / 2, bytes.len() - 1] {
        assert!(
            Checkpoint::from_bytes(&bytes[..cut]).is_err(),
            "cut at {cut}"
        );
    }
    let mut long = bytes.clone();
    long.extend_from_slice(&[0, 0]);
    assert!(
        matches!(Checkpoint::from_bytes(&long), Err(EncoderError::Format(m)) if m.contains("trailing"))
    );

    let mut ckpt = Checkpoint::from_bytes(&bytes).unwrap();
    let head = ckpt
        .tensors
        .iter()
        .position(|t| t.name.starts_with("encoder/"))
        .unwrap();
    let name = ckpt.tensors[head].name.clone();
    ckpt.tensors[head].shape.push(1);
    let mut target = GaussianEncoder::<f32>::new(model_config(), 1).unwrap();
    assert!(
        matches!(ckpt.restore_into(&mut target, 0), Err(EncoderError::ShapeMismatch { tensor, .. }) if tensor == name)
    );
    ckpt.tensors.remove(head);
    assert!(
        matches!(ckpt.restore_into(&mut target, 0), Err(EncoderError::MissingTensor(t)) if t == name)
    );

    let mut dup = Checkpoint::from_bytes(&bytes).unwrap();
    dup.tensors.push(dup.tensors[0].clone());
    assert!(
        matches!(Checkpoint::from_bytes(&dup.to_bytes()), Err(EncoderError::Format(m)) if m.contains("duplicate"))
    );
}

#[test]
fn missing_tokenizer_tensors_are_reinitialized_with_a_warning() {
    let model = GaussianEncoder::<f32>::new(model_config(), 5).unwrap();
    let mut ckpt = Checkpoint::from_model(&model, json!({}), vec![]);
    ckpt.tensors.retain(|t| !t.name.starts_with("tokenizer/"));
    let mut target = GaussianEncoder::<f32>::new(model_config(), 1).unwrap();
    let report = ckpt.restore_into(&mut target, 9).unwrap();
    assert_eq!(report.warnings.len(), 1);
    let fresh = GaussianEncoder::<f32>::new(model_config(), 9).unwrap();
    assert_eq!(target.params.tokenizer, fresh.params.tokenizer);
    assert_eq!(target.params.encoder, model.params.encoder);
}
