use mixel_core::interaction::ncc_at;
use mixel_core::interaction::Interaction;
use mixel_core::io::{apply_delta, diff_delta, load_pattern, save_pattern, Metadata};
use mixel_core::magnet::PixelState;
use mixel_core::pairs::{canvas_compile, generate_pair_set, PairMode};
use mixel_core::pattern::{complement, sylvester_hadamard, PixelGrid};
use mixel_core::plotter::{HallSensorModel, PlotterSession, VirtualSheet};
use mixel_core::protocol::{split_channels, Channel};
use mixel_core::toolpath::{
    compile_plot, emit_program, estimate_job, PowerModel, DEFAULT_FEED_MM_PER_MIN,
};
use statrs::statistics::Statistics;

fn plot(session: &mut PlotterSession, grid: &PixelGrid) {
    let program = emit_program(&compile_plot(grid, (0.0, 0.0), DEFAULT_FEED_MM_PER_MIN));
    for r in session.run_program(&program) {
        assert_eq!(r, "ok");
    }
}

#[test]
fn hall_noise_matches_declared_sigma() {
    let sheet =
        VirtualSheet::from_grid(&PixelGrid::from_rows(&[[1.0]]).unwrap(), (0.0, 0.0)).unwrap();
    let mut s = PlotterSession::new(sheet, HallSensorModel::default(), 42);
    let reads: Vec<f64> = (0..10_000).map(|_| s.read_hall(0, 0).unwrap()).collect();
    let sd = reads.iter().copied().std_dev();
    let mean = reads.iter().copied().mean();
    assert!((sd - 0.18).abs() / 0.18 < 0.05, "sd {sd}");
    assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
}

#[test]
fn three_hundred_reads_separate_by_sign() {
    let mut sheet = VirtualSheet::new(15, 20, (0.0, 0.0)).unwrap();
    for k in 0..300 {
        let state = if k % 2 == 0 {
            PixelState::NORTH
        } else {
            PixelState::SOUTH
        };
        sheet.set(k / 20, k % 20, state).unwrap();
    }
    let mut s = PlotterSession::new(sheet, HallSensorModel::default(), 7);
    for k in 0..300 {
        let v = s.read_hall(k / 20, k % 20).unwrap();
        assert_eq!(
            v.signum(),
            if k % 2 == 0 { 1.0 } else { -1.0 },
            "cell {k}: {v}"
        );
    }
}

#[test]
fn edited_file_plots_only_the_change() {
    let h = sylvester_hadamard(8).unwrap();
    let meta = Metadata::from([("name".to_string(), "h8".to_string())]);
    let (loaded, _) = load_pattern(&save_pattern(&h, &meta)).unwrap();

    let mut session = PlotterSession::with_size(8, 8, 1).unwrap();
    plot(&mut session, &loaded);

    let mut edited = loaded.clone();
    edited.set(2, 3, 0.0).unwrap();
    let delta = diff_delta(&loaded, &edited).unwrap();
    let (delta, _) = load_pattern(&save_pattern(&delta, &Metadata::new())).unwrap();
    let path = compile_plot(&delta, (0.0, 0.0), DEFAULT_FEED_MM_PER_MIN);
    assert_eq!(
        estimate_job(&path, &PowerModel::default())
            .unwrap()
            .pixels_written,
        1
    );

    plot(&mut session, &delta);
    assert_eq!(session.snapshot_sheet(), edited);
    assert_eq!(apply_delta(&loaded, &delta).unwrap(), edited);
}

#[test]
fn pair_set_locks_behave_on_the_sheet() {
    let set = generate_pair_set(2, 4, 12, PairMode::Attract, 5).unwrap();
    for p in &set.pairs {
        let mut key_sheet = PlotterSession::with_size(4, 4, 0).unwrap();
        let mut lock_sheet = PlotterSession::with_size(4, 4, 0).unwrap();
        plot(&mut key_sheet, &p.key);
        plot(&mut lock_sheet, &p.lock);
        let v = ncc_at(
            &key_sheet.snapshot_sheet(),
            &lock_sheet.snapshot_sheet(),
            0,
            0,
        )
        .unwrap();
        assert_eq!(v, -1.0);
    }
}

#[test]
fn canvas_plots_like_its_pattern() {
    let token = sylvester_hadamard(4).unwrap();
    let layout = canvas_compile(
        &token,
        &[
            [Interaction::Attract, Interaction::Agnostic],
            [Interaction::Repel, Interaction::Attract],
        ],
    )
    .unwrap();
    let mut s = PlotterSession::with_size(8, 8, 0).unwrap();
    plot(&mut s, &layout.canvas);
    assert_eq!(s.snapshot_sheet(), layout.canvas);
}

#[test]
fn dual_channel_replay_matches_merged() {
    let g = complement(&sylvester_hadamard(4).unwrap());
    let program = emit_program(&compile_plot(&g, (0.0, 0.0), DEFAULT_FEED_MM_PER_MIN));
    let (motion, device) = split_channels(&program);
    assert_eq!(
        motion.lines().count() + device.lines().count(),
        program.lines().count()
    );

    let mut s = PlotterSession::with_size(4, 4, 0).unwrap();
    for line in program.lines() {
        let channel = if motion.lines().any(|m| m == line) {
            Channel::Motion
        } else {
            Channel::Device
        };
        assert_eq!(s.handle_on(channel, line), "ok");
    }
    assert_eq!(s.snapshot_sheet(), g);
}
