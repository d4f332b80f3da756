use srw_core::config::Tolerances;
use srw_core::doors::{scene_door_states, DoorState, DoorStateReport};
use srw_core::ingest::{build_scene, filter_scene};
use srw_core::scene::{PlaneLabel, SceneGraph, Vec3};
use srw_core::synth;
use srw_core::visibility::visible_intervals;

fn two_rooms() -> SceneGraph {
    let scene = filter_scene(build_scene(&synth::two_rooms("tr")).unwrap(), 1.0);
    assert!(scene.report.accepted, "{:?}", scene.report);
    scene.scene
}

fn all_doors(scene: &SceneGraph, state: DoorState) -> Vec<DoorStateReport> {
    scene
        .planes()
        .iter()
        .filter(|p| p.label == PlaneLabel::Door)
        .map(|p| DoorStateReport { door_id: p.plane_id, closed_ratio: None, visible_samples: 0, state })
        .collect()
}

/// Visible length of lines lying on the far wall of the second room.
fn far_wall_visibility(scene: &SceneGraph, doors: &[DoorStateReport]) -> f64 {
    let view = synth::camera_view(
        "v",
        Vec3::new(1000.0, 1450.0, 1200.0),
        Vec3::new(8000.0, 1450.0, 1000.0),
        640,
        480,
        90.0,
    );
    let far: Vec<i64> = scene
        .lines()
        .iter()
        .filter(|l| l.endpoints.iter().all(|&j| scene.position(j).x == 8100.0))
        .map(|l| l.id)
        .collect();
    assert!(!far.is_empty());
    visible_intervals(scene, &view, doors, &Tolerances::default())
        .iter()
        .filter(|lv| far.contains(&lv.line_id))
        .flat_map(|lv| lv.intervals.iter().map(|i| i.len()))
        .sum()
}

#[test]
fn far_room_is_seen_only_through_open_doors() {
    let scene = two_rooms();
    assert!(far_wall_visibility(&scene, &all_doors(&scene, DoorState::Open)) > 0.0);
    assert_eq!(far_wall_visibility(&scene, &all_doors(&scene, DoorState::Closed)), 0.0);
    // an undetermined door is treated as closed
    assert_eq!(far_wall_visibility(&scene, &[]), 0.0);
}

#[test]
fn door_states_follow_rendered_masks() {
    let file = synth::two_rooms("tr");
    let scene = two_rooms();
    let doors: Vec<i64> = scene.planes().iter().filter(|p| p.label == PlaneLabel::Door).map(|p| p.plane_id).collect();
    assert_eq!(doors.len(), 2);
    let views = synth::room_cameras("a", Vec3::zeros(), Vec3::new(4000.0, 3000.0, 2800.0), 4, 160, 120);
    for closed in [vec![], doors.clone()] {
        let masks: Vec<_> = views.iter().map(|v| synth::render_mask(&synth::build(&file), v, &closed)).collect();
        let pairs: Vec<_> = views.iter().zip(&masks).collect();
        let states = scene_door_states(&scene, &pairs, 200, 0.3, 5).unwrap();
        for s in states {
            if s.visible_samples == 0 {
                continue;
            }
            let expected = if closed.contains(&s.door_id) { DoorState::Closed } else { DoorState::Open };
            assert_eq!(s.state, expected, "{s:?}");
        }
    }
}
