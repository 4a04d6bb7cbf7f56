//! Calibration probe: prints the end-to-end quantities that pin the default
//! sensor gain and reading-noise constants. Run manually with
//! `cargo test -p tacsim --test calibration -- --ignored --nocapture`.

use tacsim::*;

fn simulator(shape: ShapeName, size: Option<f64>, jitter: f64, gain: f64) -> TactileSimulator {
    let spec = make_shape(shape, size).unwrap();
    let grid = GridSpec::centered_square([0.0, 0.0], 45.0, 0.5).unwrap();
    let p = time_averaged_field(&spec, &FocalSpotModel::calibrated(), &grid).unwrap();
    let z = indent(&p, &SkinModel::default()).unwrap();
    let model = SensorModel { lever_gain_mm: gain, marker_jitter_mm: jitter, ..SensorModel::default() };
    TactileSimulator::new(z, TactileSensor::new(pin_lattice(), model))
}

#[test]
#[ignore]
fn probe_pipeline_constants() {
    // 1. Reading noise: std of the 30-frame mean delta-area on a zero field.
    let grid = GridSpec::centered_square([0.0, 0.0], 25.0, 0.5).unwrap();
    let z = IndentationField { values: ndarray::Array2::zeros((grid.ny, grid.nx)), grid };
    let sensor = TactileSensor::new(pin_lattice(), SensorModel::default());
    let mut readings = Vec::new();
    for seed in 0..300u64 {
        let r = sensor.read(&z, [0.0, 0.0], seed).unwrap();
        readings.push(r.delta_area.clone());
    }
    let mut all = Vec::new();
    for pin in 0..PIN_COUNT {
        let vals: Vec<f64> = readings.iter().map(|r| r[pin]).collect();
        let m = vals.iter().sum::<f64>() / vals.len() as f64;
        let sd =
            (vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (vals.len() - 1) as f64).sqrt();
        all.push(sd);
    }
    all.sort_by(|a, b| a.partial_cmp(b).unwrap());
    println!("reading noise sd per pin: median {:.5}, p90 {:.5}", all[63], all[114]);

    // 2. Point scan with the current gain: fused-map peak for beta scaling.
    let gain = sensor::CALIBRATED_LEVER_GAIN_MM;
    let sim = simulator(ShapeName::Point, None, 0.05, gain);
    let scan = ScanSpec::centered(5, 5, 10.0, [0.0, 0.0]).unwrap();
    let data = grid_scan(&sim, &scan, 0).unwrap();
    let map_grid = GridSpec::centered_square([0.0, 0.0], 20.0, 1.0).unwrap();
    let (map, _) = fuse_map(&data, &FusionHyper::default(), &map_grid).unwrap();
    println!("point: raw_max {:.4} mm^2 with gain {gain}", map.raw_max);
    println!("       gain for 3.77 mm^2: {:.2}", gain * 3.77 / map.raw_max);
    println!("point map extent: {:.2} mm", extent_at_fraction(&map, 0.2).unwrap());

    // 3. Circle held-out numbers with the same models.
    let sim_c = simulator(ShapeName::Circle, None, 0.05, gain);
    let data_c = grid_scan(&sim_c, &scan, 1).unwrap();
    let map_grid_c = GridSpec::centered_square([0.0, 0.0], 25.0, 1.0).unwrap();
    let (map_c, _) = fuse_map(&data_c, &FusionHyper::default(), &map_grid_c).unwrap();
    println!(
        "circle: raw_max {:.4} mm^2, outer extent {:.2} mm",
        map_c.raw_max,
        extent_at_fraction(&map_c, 0.2).unwrap()
    );

    // 4. RMSE vs acoustic ground truth on the 40 mm window.
    let cmp_grid = GridSpec::centered_square([0.0, 0.0], 20.0, 1.0).unwrap();
    let point_ref =
        time_averaged_field(&make_shape(ShapeName::Point, None).unwrap(), &FocalSpotModel::calibrated(), &cmp_grid)
            .unwrap();
    let circle_ref =
        time_averaged_field(&make_shape(ShapeName::Circle, None).unwrap(), &FocalSpotModel::calibrated(), &cmp_grid)
            .unwrap();
    let (map_p40, _) = fuse_map(&data, &FusionHyper::default(), &cmp_grid).unwrap();
    let (map_c40, _) = fuse_map(&data_c, &FusionHyper::default(), &cmp_grid).unwrap();
    println!("rmse point vs acoustic: {:.2}%", rmse_percent(&map_p40, &point_ref).unwrap());
    println!("rmse circle vs acoustic: {:.2}%", rmse_percent(&map_c40, &circle_ref).unwrap());
}
