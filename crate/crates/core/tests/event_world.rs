use eventnet::event_world::{
    eval_event_fn, identity_baseline_error, make_schedule, make_stream, write_stream_csv, CiMode, EventType, GateMode,
    OrderMode, ScheduleOptions, StreamOptions, MAX_SEGMENT, MIN_SEGMENT,
};
use eventnet::numerics::Rng;

fn fixed() -> ScheduleOptions {
    ScheduleOptions {
        order: OrderMode::Fixed,
        no_repeat: false,
    }
}

#[test]
fn segment_lengths_pass_chi_square() {
    let sched = make_schedule(&mut Rng::new(11), 90_000, fixed()).unwrap();
    let complete = &sched.segments[..sched.segments.len() - 1];
    assert!(complete.len() >= 10_000);
    let complete = &complete[..10_000];
    let bins = MAX_SEGMENT - MIN_SEGMENT + 1;
    let mut counts = vec![0usize; bins];
    for s in complete {
        counts[s.len() - MIN_SEGMENT] += 1;
    }
    let expected = complete.len() as f64 / bins as f64;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    // 7 degrees of freedom, p = 0.001.
    assert!(chi2 < 24.32, "chi2 = {chi2}, counts = {counts:?}");
}

#[test]
fn fixed_order_cycles_through_all_events() {
    let sched = make_schedule(&mut Rng::new(2), 500, fixed()).unwrap();
    let expected = [EventType::Add, EventType::Sin, EventType::Sub, EventType::Con];
    for (k, seg) in sched.segments.iter().enumerate() {
        assert_eq!(seg.event, expected[k % 4]);
    }
}

#[test]
fn random_order_without_repeats() {
    let opts = ScheduleOptions {
        order: OrderMode::Random,
        no_repeat: true,
    };
    let sched = make_schedule(&mut Rng::new(5), 5_000, opts).unwrap();
    for w in sched.segments.windows(2) {
        assert_ne!(w[0].event, w[1].event);
    }
}

#[test]
fn random_order_visits_every_event_and_may_repeat() {
    let opts = ScheduleOptions {
        order: OrderMode::Random,
        no_repeat: false,
    };
    let sched = make_schedule(&mut Rng::new(5), 20_000, opts).unwrap();
    let repeats = sched.segments.windows(2).filter(|w| w[0].event == w[1].event).count();
    let frac = repeats as f64 / (sched.segments.len() - 1) as f64;
    assert!((frac - 0.25).abs() < 0.03, "{frac}");
}

#[test]
fn identity_plateau_matches_analytic_value() {
    let mut rng = Rng::new(3);
    let sched = make_schedule(&mut rng, 200_000, fixed()).unwrap();
    let stream = make_stream(&mut rng, &sched, &StreamOptions::default()).unwrap();
    let err = identity_baseline_error(&stream).unwrap();
    let analytic = (0.5 + 0.5 + 2.0 / std::f64::consts::PI) / 4.0;
    assert!((err - analytic).abs() < 0.02, "{err} vs {analytic}");
}

#[test]
fn early_switch_flip_lies_in_range() {
    let mut rng = Rng::new(8);
    let sched = make_schedule(&mut rng, 3_000, fixed()).unwrap();
    let opts = StreamOptions {
        ci_mode: CiMode::EarlySwitch,
        ..StreamOptions::default()
    };
    let stream = make_stream(&mut rng, &sched, &opts).unwrap();
    let segs = &sched.segments;
    for k in 0..segs.len() - 1 {
        let next = segs[k + 1].event.one_hot();
        let flip = (segs[k].start..segs[k].end).find(|&t| stream[t].ci == next);
        let u = flip.unwrap_or_else(|| panic!("segment {k} never announces its successor"));
        assert!(u >= segs[k].start + 2 && u < segs[k + 1].start);
        assert!(stream[u..segs[k].end].iter().all(|s| s.ci == next));
    }
}

#[test]
fn gradual_pattern_around_switch() {
    let mut rng = Rng::new(4);
    let sched = make_schedule(&mut rng, 400, fixed()).unwrap();
    let opts = StreamOptions {
        gate_mode: GateMode::Gradual,
        ..StreamOptions::default()
    };
    let stream = make_stream(&mut rng, &sched, &opts).unwrap();
    for seg in sched.segments.iter().skip(1) {
        let t = seg.start;
        assert_eq!(stream[t - 1].surprise, 0.5);
        assert_eq!(stream[t].surprise, 1.0);
        if t + 1 < stream.len() {
            assert_eq!(stream[t + 1].surprise, 0.5);
        }
    }
    assert_eq!(stream[0].surprise, 0.0);
}

#[test]
fn csv_export_round_trips() {
    let mut rng = Rng::new(1);
    let sched = make_schedule(&mut rng, 50, fixed()).unwrap();
    let stream = make_stream(&mut rng, &sched, &StreamOptions::default()).unwrap();
    let mut buf = Vec::new();
    write_stream_csv(&stream, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("t,x,y,target,event,ci0,ci1,ci2,ci3,surprise\n"));
    assert!(text.ends_with('\n'));
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    for (rec, s) in rdr.records().zip(&stream) {
        let rec = rec.unwrap();
        let x: f64 = rec[1].parse().unwrap();
        let y: f64 = rec[2].parse().unwrap();
        let target: f64 = rec[3].parse().unwrap();
        let event: EventType = rec[4].parse().unwrap();
        assert_eq!((x, y, target, event), (s.x, s.y, s.target, s.event));
        assert_eq!(eval_event_fn(event, x, y), target);
    }
}
