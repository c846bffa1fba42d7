use lipinc_core::diff::Graph;
use lipinc_core::extract::{ExtractConfig, SequenceBundle};
use lipinc_core::ingest::{load_manifest, validate_manifest, write_manifest, Label};
use lipinc_core::synth::{generate_dataset, render_clip, Mode, SynthSpec};
use lipinc_core::Array;

fn avg_ssim(seq: &Array<f32>) -> f64 {
    let mut g = Graph::<f64>::new();
    let n = seq.shape()[0];
    let frames: Vec<_> = (0..n)
        .map(|i| {
            let f = seq.outer(i).cast::<f64>();
            let v = g.constant(f);
            g.channel_mean(v).unwrap()
        })
        .collect();
    let mut total = 0.0;
    let mut pairs = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let s = g.global_ssim(frames[i], frames[j]).unwrap();
            total += g.value(s).data()[0];
            pairs += 1.0;
        }
    }
    total / pairs
}

#[test]
fn manifest_round_trip_is_lossless() {
    let spec = SynthSpec { frames: 12, ..SynthSpec::default() };
    let (clip, _) = render_clip(&spec, "rt", Mode::Fake);
    let dir = tempfile::tempdir().unwrap();
    let path = write_manifest(&clip, dir.path()).unwrap();
    let back = load_manifest(&path).unwrap();
    assert_eq!(back.clip_id, clip.clip_id);
    assert_eq!(back.label, Some(Label::Fake));
    for (a, b) in clip.frames.iter().zip(&back.frames) {
        assert_eq!(a.landmarks, b.landmarks);
        let max = a.image.data.iter().zip(&b.image.data).map(|(x, y)| (x - y).abs()).fold(0f32, f32::max);
        assert!(max <= 0.5 / 255.0 + 1e-6, "pixel error {max}");
    }
}

#[test]
fn synthetic_clips_extract() {
    let spec = SynthSpec { seed: 5, ..SynthSpec::default() };
    let cfg = ExtractConfig::default();
    for i in 0..12 {
        let mode = if i % 2 == 0 { Mode::Real } else { Mode::Fake };
        let (clip, _) = render_clip(&spec, &format!("x{i}"), mode);
        let b = SequenceBundle::extract(&clip, &cfg).unwrap();
        assert_eq!(b.sequences.color.shape(), &[8, 64, 144, 3]);
    }
}

#[test]
fn real_clips_are_more_self_similar_than_fakes() {
    let spec = SynthSpec { seed: 9, ..SynthSpec::default() };
    let cfg = ExtractConfig::default();
    let mut real = 0.0;
    let mut fake = 0.0;
    let n = 100;
    for i in 0..n {
        let (r, _) = render_clip(&spec, &format!("r{i}"), Mode::Real);
        let (f, _) = render_clip(&spec, &format!("f{i}"), Mode::Fake);
        for clip in [&r, &f] {
            assert!(validate_manifest(clip).is_empty());
        }
        real += avg_ssim(&SequenceBundle::extract(&r, &cfg).unwrap().sequences.color);
        fake += avg_ssim(&SequenceBundle::extract(&f, &cfg).unwrap().sequences.color);
    }
    println!("mean AvgS real {:.4} fake {:.4}", real / n as f64, fake / n as f64);
    assert!(real > fake);
}

#[test]
fn dataset_index_is_stratified_and_loadable() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SynthSpec { frames: 10, seed: 3, ..SynthSpec::default() };
    let idx = generate_dataset(20, 0.5, &spec, dir.path()).unwrap();
    let fakes = idx.entries.iter().filter(|e| e.label == Some(Label::Fake)).count();
    assert_eq!(fakes, 10);
    let again = lipinc_core::dataset::DatasetIndex::load(dir.path()).unwrap();
    assert_eq!(again.entries, idx.entries);
    for e in &idx.entries {
        let clip = load_manifest(idx.path_of(e)).unwrap();
        assert_eq!(clip.label, e.label);
    }
}

fn files(dir: &std::path::Path) -> Vec<(std::path::PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn generation_is_bit_identical() {
    let spec = SynthSpec { frames: 12, seed: 4, ..SynthSpec::default() };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    generate_dataset(6, 0.5, &spec, a.path()).unwrap();
    generate_dataset(6, 0.5, &spec, b.path()).unwrap();
    let (fa, fb) = (files(a.path()), files(b.path()));
    assert_eq!(fa.len(), 6 * 13 + 1);
    assert!(fa == fb);
}

#[test]
fn dataset_rejects_bad_arguments() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SynthSpec::default();
    assert_eq!(generate_dataset(1, 0.5, &spec, dir.path()).unwrap_err().code(), "E_CONFIG");
    assert_eq!(generate_dataset(10, 1.0, &spec, dir.path()).unwrap_err().code(), "E_CONFIG");
}
