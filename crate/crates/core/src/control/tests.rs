use proptest::prelude::*;

use super::*;

fn params() -> FollowerParams {
    FollowerParams::default()
}

fn two_point(target: Point2) -> Path {
    Path::new(vec![Point2::new(0.0, 0.0), target])
}

fn follower() -> FollowerState {
    FollowerState::with_mode(params(), FollowerMode::FollowPath)
}

#[test]
fn threshold_examples() {
    let pose = Pose::new(0.0, 0.0, 0.0);
    let at = |deg: f64| {
        let t = Point2::from_angle(deg.to_radians()) * 2.0;
        follower().follow_step(&pose, &two_point(t))
    };
    assert_eq!(at(4.9).action, Action::Forward(0.1));
    assert_eq!(at(-4.9).action, Action::Forward(0.1));
    assert_eq!(at(5.1).action, Action::TurnLeft(10f64.to_radians()));
    assert_eq!(at(-5.1).action, Action::TurnRight(10f64.to_radians()));
    assert_eq!(at(179.0).action, Action::TurnLeft(10f64.to_radians()));
    let e = at(30.0).angular_error.unwrap();
    assert!((e - 30f64.to_radians()).abs() < 1e-12);
}

#[test]
fn empty_path_and_goal_reached() {
    let pose = Pose::new(1.0, 1.0, 0.3);
    let mut f = follower();
    let out = f.follow_step(&pose, &Path::new(vec![]));
    assert!(out.empty_path);
    assert_eq!(out.action, Action::Stay);
    let out = f.follow_step(&pose, &two_point(Point2::new(1.1, 1.05)));
    assert_eq!(out.action, Action::Stay);
    assert!(!out.empty_path);
    assert_eq!(f.mode, FollowerMode::Idle);
    f.reset_path();
    assert_eq!(f.mode, FollowerMode::FollowPath);
}

#[test]
fn waypoints_advance_within_radius() {
    let path = Path::new(vec![
        Point2::new(0.0, 0.0),
        Point2::new(1.0, 0.0),
        Point2::new(1.0, 1.0),
    ]);
    let mut f = follower();
    let out = f.follow_step(&Pose::new(0.9, 0.0, 0.0), &path);
    assert_eq!(f.next_waypoint, 2);
    assert_eq!(out.action, Action::TurnLeft(10f64.to_radians()));
    f.follow_step(&Pose::new(0.0, 0.0, 0.0), &path);
    assert_eq!(f.next_waypoint, 2, "waypoints never move backwards");
}

#[test]
fn follower_reaches_goal_in_free_space() {
    let goal = Point2::new(2.0, -1.5);
    let path = two_point(goal);
    let mut pose = Pose::new(0.0, 0.0, 2.5);
    let mut f = follower();
    for _ in 0..500 {
        let out = f.follow_step(&pose, &path);
        pose = match out.action {
            Action::Forward(d) => Pose {
                position: pose.position + pose.orientation() * d,
                heading: pose.heading,
            },
            Action::Stay => break,
            a => pose.rotated(a.rotation()),
        };
    }
    assert_eq!(f.mode, FollowerMode::Idle);
    assert!(pose.position.distance(goal) <= params().goal_radius);
}

#[test]
fn look_around_is_36_left_turns() {
    let mut f = FollowerState::new(params());
    let mut turned = 0.0;
    let mut n = 0;
    while let Some(a) = f.look_around_step() {
        assert_eq!(a, Action::TurnLeft(10f64.to_radians()));
        turned += a.rotation();
        n += 1;
        assert!(n <= 36);
    }
    assert_eq!(n, 36);
    assert!((turned - TAU).abs() < 1e-9);
    assert_eq!(f.mode, FollowerMode::FollowPath);
    assert_eq!(f.look_around_step(), None);
}

fn run_recovery(f: &mut FollowerState) -> Vec<Action> {
    f.enter_recovery();
    let mut out = Vec::new();
    while let Some(step) = f.recovery_step() {
        out.push(step.action);
        assert_eq!(step.finished, !f.in_recovery());
        assert!(out.len() < 100);
    }
    out
}

#[test]
fn recovery_program_shape() {
    let mut f = follower();
    let acts = run_recovery(&mut f);
    let turn = Action::TurnLeft(10f64.to_radians());
    assert_eq!(acts.len(), 18 + 3 + 18);
    assert!(acts[..18].iter().all(|a| *a == turn));
    assert!(acts[18..21].iter().all(|a| *a == Action::Forward(0.1)));
    assert!(acts[21..].iter().all(|a| *a == turn));
    let total: f64 = acts.iter().map(Action::rotation).sum();
    assert!((total - TAU).abs() < 1e-9);
    assert_eq!(f.mode, FollowerMode::FollowPath);
}

#[test]
fn recovery_nudge_variants() {
    let mut f = FollowerState::with_mode(
        FollowerParams {
            forward_nudge: 0.0,
            ..params()
        },
        FollowerMode::FollowPath,
    );
    assert_eq!(run_recovery(&mut f).len(), 36);
    let mut f = FollowerState::with_mode(
        FollowerParams {
            forward_nudge: 0.5,
            ..params()
        },
        FollowerMode::FollowPath,
    );
    let acts = run_recovery(&mut f);
    assert_eq!(acts.iter().filter(|a| a.is_forward()).count(), 5);
    let mut f = follower();
    f.enter_recovery();
    for _ in 0..19 {
        f.recovery_step();
    }
    let FollowerMode::Recovery(RecoveryStage::Forward(rem)) = f.mode else {
        panic!("expected the forward stage, got {:?}", f.mode);
    };
    assert!((rem - 0.2).abs() < 1e-9);
    f.abort_recovery_forward();
    assert_eq!(f.mode, FollowerMode::Recovery(RecoveryStage::Turn2(PI)));
    let mut rest = 0;
    while f.recovery_step().is_some() {
        rest += 1;
    }
    assert_eq!(rest, 18);
    assert_eq!(follower().recovery_step(), None);
}

#[test]
fn recovery_nudge_of_two_steps() {
    let mut f = FollowerState::with_mode(
        FollowerParams {
            forward_nudge: 0.2,
            ..params()
        },
        FollowerMode::FollowPath,
    );
    let acts = run_recovery(&mut f);
    assert_eq!(acts.len(), 18 + 2 + 18);
    assert_eq!(acts.iter().filter(|a| a.is_forward()).count(), 2);
}

#[test]
fn recovery_reentry_restarts_the_program() {
    let mut f = follower();
    f.enter_recovery();
    for _ in 0..10 {
        f.recovery_step();
    }
    let rest = run_recovery(&mut f);
    assert_eq!(rest.len(), 18 + 3 + 18);
}

#[test]
fn value_wrappers_match_methods() {
    let pose = Pose::new(0.0, 0.0, 1.0);
    let path = two_point(Point2::new(3.0, 0.5));
    let mut m = follower();
    let a = m.follow_step(&pose, &path);
    let (b, s) = follow_step(follower(), &pose, &path);
    assert_eq!((a, m), (b, s));
    let (a, s) = look_around_step(FollowerState::new(params()));
    assert_eq!(a, Some(Action::TurnLeft(10f64.to_radians())));
    assert_eq!(s.mode, FollowerMode::LookAround(TAU - 10f64.to_radians()));
    let mut r = follower();
    r.enter_recovery();
    let (step, s) = recovery_step(r);
    assert!(!step.unwrap().finished);
    assert!(s.in_recovery());
}

#[test]
fn bump_fires_after_one_second_stalled() {
    let mut b = BumpDetectorState::new(BumpParams::default());
    let pose = Pose::new(1.0, 1.0, 0.0);
    let fwd = Action::Forward(0.1);
    for k in 0..9 {
        assert_eq!(b.update(&fwd, &pose, 0.1), None, "tick {k}");
    }
    assert_eq!(b.update(&fwd, &pose, 0.1), Some(BumpEvent { pose }));
    for _ in 0..9 {
        assert_eq!(b.update(&fwd, &pose, 0.1), None);
    }
    assert!(b.update(&fwd, &pose, 0.1).is_some(), "re-arms after firing");
}

#[test]
fn bump_never_fires_while_moving_or_turning() {
    let mut b = BumpDetectorState::new(BumpParams::default());
    let mut pose = Pose::new(0.0, 0.0, 0.0);
    for _ in 0..100 {
        pose.position.x += 0.1;
        assert_eq!(b.update(&Action::Forward(0.1), &pose, 0.1), None);
    }
    for _ in 0..100 {
        assert_eq!(b.update(&Action::TurnLeft(0.1), &pose, 0.1), None);
    }
}

#[test]
fn bump_window_resets_on_turn() {
    let mut b = BumpDetectorState::new(BumpParams::default());
    let pose = Pose::new(0.0, 0.0, 0.0);
    for _ in 0..9 {
        assert!(b.update(&Action::Forward(0.1), &pose, 0.1).is_none());
    }
    assert!(b.update(&Action::TurnRight(0.2), &pose, 0.1).is_none());
    for _ in 0..9 {
        assert!(b.update(&Action::Forward(0.1), &pose, 0.1).is_none());
    }
    assert!(b.update(&Action::Forward(0.1), &pose, 0.1).is_some());
    b.reset();
    assert_eq!(b.commanded_forward_since, None);
    let (ev, s) = bump_update(b.clone(), &Action::Stay, &pose, 0.1);
    assert!(ev.is_none() && s.commanded_forward_since.is_none());
}

#[test]
fn bump_accumulates_slow_creep() {
    let mut b = BumpDetectorState::new(BumpParams::default());
    let mut pose = Pose::new(0.0, 0.0, 0.0);
    let mut fired = false;
    for _ in 0..10 {
        pose.position.x += 0.001;
        fired |= b.update(&Action::Forward(0.1), &pose, 0.1).is_some();
    }
    assert!(fired, "sub-epsilon motion counts as stalled");
}

proptest! {
    #[test]
    fn mirrored_targets_give_mirrored_actions(
        r in 0.5f64..5.0,
        ang in -3.1f64..3.1,
        heading in -3.0f64..3.0,
    ) {
        let pose = Pose::new(0.0, 0.0, heading);
        let mirror = Pose::new(0.0, 0.0, -heading);
        let t = Point2::from_angle(heading + ang) * r;
        let tm = Point2::new(t.x, -t.y);
        let a = follower().follow_step(&pose, &two_point(t));
        let b = follower().follow_step(&mirror, &two_point(tm));
        let (ea, eb) = (a.angular_error.unwrap(), b.angular_error.unwrap());
        prop_assume!((ea.abs() - PI).abs() > 1e-6);
        prop_assert!((ea + eb).abs() < 1e-9);
        let flipped = match a.action {
            Action::TurnLeft(d) => Action::TurnRight(d),
            Action::TurnRight(d) => Action::TurnLeft(d),
            other => other,
        };
        prop_assert_eq!(b.action, flipped);
    }

    #[test]
    fn heading_error_is_normalized(hx in -50.0f64..50.0, tx in -5.0f64..5.0, ty in -5.0f64..5.0) {
        prop_assume!(tx.abs() + ty.abs() > 1e-6);
        let e = heading_error(&Pose::new(0.0, 0.0, hx), Point2::new(tx, ty));
        prop_assert!(e > -PI - 1e-12 && e <= PI + 1e-12);
    }
}
