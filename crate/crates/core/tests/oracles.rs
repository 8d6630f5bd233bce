mod common;

use bcosfire::*;

fn horizontal_band(w: usize, h: usize, width: usize, x_range: std::ops::Range<usize>) -> GrayImage {
    let top = h / 2 - width / 2;
    GrayImage::from_fn(w, h, |x, y| {
        if (top..top + width).contains(&y) && x_range.contains(&x) {
            1.0
        } else {
            0.0
        }
    })
}

#[test]
fn blur_shift_matches_direct_weighted_maximum() {
    let mut img = GrayImage::zeros(101, 101);
    img.set(50, 50, 1.0);
    let out = blur_shift(&img, 10, 0.0, 2.0, 1.0).unwrap();

    let sigma: f64 = 12.0;
    let r = (3.0 * sigma).ceil() as isize;
    let refl = |i: isize| reflect(i, 101) as usize;
    let mut peak = (0, 0, 0.0);
    for y in 0..101isize {
        for x in 0..101isize {
            let mut m = 0.0f64;
            for dy in -r..=r {
                for dx in -r..=r {
                    let g = (-((dx * dx + dy * dy) as f64) / (2.0 * sigma * sigma)).exp();
                    m = m.max(img.get(refl(x + 10 + dx), refl(y + dy)) * g);
                }
            }
            let got = out.get(x as usize, y as usize);
            assert!((got - m).abs() <= 1e-12, "({x}, {y}): {got} vs {m}");
            if got > peak.2 {
                peak = (x, y, got);
            }
        }
    }
    assert_eq!((peak.0, peak.1), (40, 50));
    assert_eq!(peak.2, 1.0);
}

#[test]
fn dog_prefers_its_own_line_width() {
    let peak_on_centre_row = |line_width: usize| {
        let img = horizontal_band(300, 300, line_width, 0..300);
        let r = dog_response(&img, 5.0, Polarity::BrightOnDark).unwrap();
        let column: Vec<f64> = (0..300).map(|y| r.get(150, y)).collect();
        let best = column.iter().copied().fold(0.0, f64::max);
        (column, best)
    };
    let (column, tuned) = peak_on_centre_row(5);
    let argmax = column.iter().position(|&v| v == tuned).unwrap();
    assert_eq!(argmax, 150);
    let (_, narrow) = peak_on_centre_row(2);
    let (_, wide) = peak_on_centre_row(12);
    assert!(tuned > narrow, "{tuned} vs {narrow}");
    assert!(tuned > wide, "{tuned} vs {wide}");
}

#[test]
fn bar_response_peaks_on_axis() {
    let img = horizontal_band(300, 300, 5, 100..200);
    let r = response(&img, &CosfireParams::synthetic(), 0.0, Polarity::BrightOnDark).unwrap();
    let column: Vec<f64> = (0..300).map(|y| r.get(150, y)).collect();
    let peak = column.iter().copied().fold(0.0, f64::max);
    assert_eq!(column.iter().position(|&v| v == peak), Some(150));
    let off = r.get(150, 130).max(r.get(150, 170));
    assert!(off < 0.25 * peak, "20 px off axis: {:.3} of peak", off / peak);
}

#[test]
fn vertical_bar_selects_the_vertical_filter() {
    let img = horizontal_band(200, 200, 5, 30..170).rotate90();
    let pair = rotation_tolerant(&img, &CosfireParams::synthetic(), Polarity::BrightOnDark).unwrap();
    for y in 60..140 {
        assert_eq!(pair.orientation_at(100, y), 4, "row {y}");
        assert_eq!(pair.angle_at(100, y), std::f64::consts::FRAC_PI_2);
    }
}

#[test]
fn circle_response_is_even_along_the_circumference() {
    let s = generate(&StimulusSpec::circle(0.0, 0)).unwrap();
    let pair = rotation_tolerant(&s.image, &CosfireParams::synthetic(), Polarity::BrightOnDark).unwrap();
    let values: Vec<f64> = s.truth.points().map(|(x, y)| pair.response.get(x, y)).collect();
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(0.0, f64::max);
    assert!(lo >= 0.5 * hi, "min/max = {:.3}", lo / hi);
}

#[test]
fn perfect_detector_gives_a_flat_curve() {
    let img = horizontal_band(40, 30, 3, 5..35);
    let prep = Prepared::new(&img, &common::small_params(), Polarity::BrightOnDark).unwrap();
    let truth = prep.binarize(0.01).unwrap();
    let report = sweep_prepared(std::slice::from_ref(&prep), std::slice::from_ref(&truth), 2.0).unwrap();
    assert_eq!(report.curve.points().len(), 101);
    for (k, point) in report.curve.points().iter().enumerate() {
        let per = report.per_image[0][k];
        assert_eq!(point.f_measure, per.f_measure);
        assert!(point.threshold == 0.0 || point.recall > 0.0);
    }
    assert_eq!(report.curve.best().f_measure, 1.0);
}

#[test]
fn png_round_trip_preserves_levels() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("levels.png");
    let img = GrayImage::from_fn(17, 9, |x, y| ((x * 15 + y * 7) % 256) as f64 / 255.0);
    save_png(&img, &path).unwrap();
    let back = load_image(&path).unwrap();
    assert_eq!(back.dimensions(), (17, 9));
    for (a, b) in img.data().iter().zip(back.data()) {
        assert!((a - b).abs() < 1e-12);
    }
    let mask = BinaryMap::from_fn(17, 9, |x, y| x == y);
    let mpath = dir.path().join("mask.png");
    mask.save_png(&mpath).unwrap();
    assert_eq!(BinaryMap::from_annotation(&load_image(&mpath).unwrap()), mask);
}

#[test]
fn missing_and_corrupt_files_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(load_image(dir.path().join("nope.png")), Err(Error::Io { .. })));
    let bad = dir.path().join("bad.png");
    std::fs::write(&bad, b"not an image").unwrap();
    assert!(matches!(load_image(&bad), Err(Error::Format { .. }) | Err(Error::Io { .. })));
}
