//! Regenerates the files under `tests/fixtures`.
//!
//! ```text
//! cargo run -p srw-core --example make_fixtures
//! ```
//!
//! The box-room goldens are written by running `generate` on the fixture
//! input; rerun this only when the annotation output is meant to change.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use srw_core::cli::{cmd_generate, RunConfig};
use srw_core::scene::Vec3;
use srw_core::synth::{self, CorpusScene};
use srw_core::visibility::AnnotatedView;
use srw_core::wireframe::{JunctionScoreMap, LineScoreMap, PredictedJunction, PredictedSegment, PredictionFile};

fn write(path: &Path, text: &str) {
    fs::create_dir_all(path.parent().unwrap()).unwrap();
    fs::write(path, text).unwrap();
}

fn noisy_prediction(gt: &AnnotatedView, rng: &mut ChaCha8Rng) -> PredictionFile {
    let mut p = PredictionFile::from_annotation(gt);
    let sx = gt.width as f64 / 128.0;
    for j in p.junctions.iter_mut() {
        j.xy[0] += rng.random_range(-1.0..1.0) * sx;
        j.xy[1] += rng.random_range(-1.0..1.0) * sx;
        let mut s = j.scores.to_array();
        let keep = rng.random_range(0.5..1.0);
        for v in s.iter_mut() {
            *v = if *v == 1.0 { keep } else { (1.0 - keep) / 2.0 };
        }
        j.scores = JunctionScoreMap::from_array(s);
    }
    for s in p.segments.iter_mut() {
        for v in s.xy.iter_mut() {
            *v += rng.random_range(-2.0..2.0) * sx;
        }
        let mut sc = s.scores.to_array();
        let keep = rng.random_range(0.3..1.0);
        for v in sc.iter_mut() {
            *v = if *v == 1.0 { keep } else { (1.0 - keep) / 5.0 };
        }
        s.scores = LineScoreMap::from_array(sc);
    }
    for _ in 0..3 {
        let (w, h) = (gt.width as f64, gt.height as f64);
        p.segments.push(PredictedSegment {
            xy: [rng.random_range(0.0..w), rng.random_range(0.0..h), rng.random_range(0.0..w), rng.random_range(0.0..h)],
            scores: LineScoreMap::from_array([0.6, 0.2, 0.1, 0.05, 0.03, 0.02]),
        });
        p.junctions.push(PredictedJunction {
            xy: [rng.random_range(0.0..w), rng.random_range(0.0..h)],
            scores: JunctionScoreMap::from_array([0.5, 0.3, 0.2]),
        });
    }
    p
}

fn main() {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    if root.exists() {
        fs::remove_dir_all(&root).unwrap();
    }

    write(&root.join("unit_cube.json"), &(serde_json::to_string_pretty(&synth::unit_cube()).unwrap() + "\n"));
    write(&root.join("two_rooms.json"), &(serde_json::to_string_pretty(&synth::two_rooms("two_rooms")).unwrap() + "\n"));

    let corpus = root.join("corpus");
    for scene in synth::demo_corpus() {
        synth::write_scene_dir(&corpus, &scene, true).unwrap();
    }

    let size = Vec3::new(4000.0, 3000.0, 2800.0);
    let box_input = root.join("box_room/input");
    let box_scene = CorpusScene {
        name: "box_room".into(),
        file: synth::box_room("box_room", size),
        views: synth::room_cameras("view_", Vec3::zeros(), size, 4, 640, 480),
        closed_doors: Vec::new(),
    };
    synth::write_scene_dir(&box_input, &box_scene, false).unwrap();
    let golden = root.join("box_room/golden");
    let summary = cmd_generate(&RunConfig::new(&box_input, &golden)).unwrap();
    assert!(summary.ok());

    // evaluation fixture: ground truth from the box room, noisy predictions
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let ann_dir = golden.join("annotations/box_room");
    let mut names: Vec<_> = fs::read_dir(&ann_dir).unwrap().map(|e| e.unwrap().path()).collect();
    names.sort();
    for path in names {
        let text = fs::read_to_string(&path).unwrap();
        let gt: AnnotatedView = serde_json::from_str(&text).unwrap();
        let file = path.file_name().unwrap();
        write(&root.join("eval/gt/box_room").join(file), &text);
        write(&root.join("eval/pred/box_room").join(file), &(noisy_prediction(&gt, &mut rng).to_json() + "\n"));
    }
    println!("fixtures written to {}", root.display());
}
