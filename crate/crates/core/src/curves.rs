//! Training/testing MAE curve emission: the CSV schema from the training
//! module plus a standalone SVG line chart with exactly two series.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::training::{format_significant, TrainLog};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 20.0;
const MARGIN_BOTTOM: f64 = 50.0;

/// Renders the two MAE series as an SVG line chart (train solid, test
/// dashed), axes labeled `epoch` and `MAE`.
pub fn curves_svg(train_mae: &[f64], test_mae: &[f64]) -> Result<String> {
    if train_mae.is_empty() || train_mae.len() != test_mae.len() {
        return Err(Error::Parameter(format!(
            "curve series must be nonempty and aligned, got {} and {}",
            train_mae.len(),
            test_mae.len()
        )));
    }
    let epochs = train_mae.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in train_mae.iter().chain(test_mae) {
        if !v.is_finite() {
            return Err(Error::Numeric("non-finite curve value".into()));
        }
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if hi - lo < 1e-12 {
        lo -= 1.0;
        hi += 1.0;
    } else {
        let pad = (hi - lo) * 0.05;
        lo -= pad;
        hi += pad;
    }

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let x_at = |i: usize| {
        if epochs == 1 {
            MARGIN_LEFT + plot_w / 2.0
        } else {
            MARGIN_LEFT + plot_w * i as f64 / (epochs - 1) as f64
        }
    };
    let y_at = |v: f64| MARGIN_TOP + plot_h * (1.0 - (v - lo) / (hi - lo));
    let points = |series: &[f64]| {
        series
            .iter()
            .enumerate()
            .map(|(i, &v)| format!("{:.2},{:.2}", x_at(i), y_at(v)))
            .collect::<Vec<_>>()
            .join(" ")
    };

    let x_axis_y = MARGIN_TOP + plot_h;
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" \
         font-family=\"sans-serif\" font-size=\"12\">\n"
    ));
    svg.push_str(&format!(
        "  <line x1=\"{MARGIN_LEFT}\" y1=\"{x_axis_y}\" x2=\"{:.2}\" y2=\"{x_axis_y}\" \
         stroke=\"black\"/>\n",
        MARGIN_LEFT + plot_w
    ));
    svg.push_str(&format!(
        "  <line x1=\"{MARGIN_LEFT}\" y1=\"{MARGIN_TOP}\" x2=\"{MARGIN_LEFT}\" y2=\"{x_axis_y}\" \
         stroke=\"black\"/>\n"
    ));
    svg.push_str(&format!(
        "  <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">epoch</text>\n",
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 12.0
    ));
    svg.push_str(&format!(
        "  <text x=\"16\" y=\"{:.2}\" text-anchor=\"middle\" \
         transform=\"rotate(-90 16 {:.2})\">MAE</text>\n",
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0
    ));
    // Extremal tick labels on both axes.
    svg.push_str(&format!(
        "  <text x=\"{MARGIN_LEFT}\" y=\"{:.2}\" text-anchor=\"middle\">1</text>\n",
        x_axis_y + 16.0
    ));
    svg.push_str(&format!(
        "  <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{epochs}</text>\n",
        MARGIN_LEFT + plot_w,
        x_axis_y + 16.0
    ));
    svg.push_str(&format!(
        "  <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>\n",
        MARGIN_LEFT - 6.0,
        x_axis_y,
        format_significant(lo, 4)
    ));
    svg.push_str(&format!(
        "  <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>\n",
        MARGIN_LEFT - 6.0,
        MARGIN_TOP + 10.0,
        format_significant(hi, 4)
    ));
    svg.push_str(&format!(
        "  <polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"{}\"/>\n",
        points(train_mae)
    ));
    svg.push_str(&format!(
        "  <polyline fill=\"none\" stroke=\"#d62728\" stroke-width=\"1.5\" \
         stroke-dasharray=\"5,3\" points=\"{}\"/>\n",
        points(test_mae)
    ));
    svg.push_str(&format!(
        "  <text x=\"{:.2}\" y=\"{:.2}\" fill=\"#1f77b4\">train MAE</text>\n",
        MARGIN_LEFT + 8.0,
        MARGIN_TOP + 14.0
    ));
    svg.push_str(&format!(
        "  <text x=\"{:.2}\" y=\"{:.2}\" fill=\"#d62728\">test MAE</text>\n",
        MARGIN_LEFT + 8.0,
        MARGIN_TOP + 30.0
    ));
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Writes `<stem>.csv` and `<stem>.svg` for a training log into `dir`.
/// Returns the two paths.
pub fn emit_curves(log: &TrainLog, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
    if log.epochs.is_empty() {
        return Err(Error::Parameter("curve emission needs trained epochs".into()));
    }
    let csv_path = dir.join(format!("{stem}.csv"));
    let svg_path = dir.join(format!("{stem}.svg"));
    log.write_csv(&csv_path)?;
    let train: Vec<f64> = log.epochs.iter().map(|e| e.train_mae).collect();
    let test: Vec<f64> = log.epochs.iter().map(|e| e.test_mae).collect();
    crate::write_atomic(&svg_path, curves_svg(&train, &test)?.as_bytes())?;
    Ok((csv_path, svg_path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::training::EpochStats;

    fn log_with(maes: &[(f64, f64)]) -> TrainLog {
        TrainLog {
            seed: 0,
            initial_train_mae: 1.0,
            initial_test_mae: 1.0,
            epochs: maes
                .iter()
                .map(|&(train_mae, test_mae)| EpochStats {
                    train_mae,
                    test_mae,
                    max_grad_norm: 0.1,
                    wall_secs: 0.0,
                })
                .collect(),
            final_lambda: 1.0,
            final_lambda_prime: 1.0,
            measured_s: 1.0,
            pl_onset_epoch: None,
        }
    }

    #[test]
    fn svg_has_exactly_two_polylines_and_labels() {
        let svg = curves_svg(&[1.0, 0.8, 0.7], &[1.1, 0.9, 0.85]).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains(">epoch</text>"));
        assert!(svg.contains(">MAE</text>"));
    }

    #[test]
    fn constant_series_render_horizontal_lines() {
        let svg = curves_svg(&[0.5, 0.5, 0.5], &[0.6, 0.6, 0.6]).unwrap();
        for polyline in svg.split("<polyline").skip(1) {
            let points = polyline.split("points=\"").nth(1).unwrap();
            let points = &points[..points.find('"').unwrap()];
            let ys: Vec<&str> = points
                .split_whitespace()
                .map(|p| p.split(',').nth(1).unwrap())
                .collect();
            assert!(ys.windows(2).all(|w| w[0] == w[1]), "{points}");
        }
    }

    #[test]
    fn emit_writes_csv_and_svg() {
        let dir = tempfile::tempdir().unwrap();
        let log = log_with(&[(1.0, 1.2), (0.8, 0.9), (0.7, 0.85)]);
        let (csv, svg) = emit_curves(&log, dir.path(), "model").unwrap();
        let csv_text = std::fs::read_to_string(csv).unwrap();
        assert_eq!(csv_text.trim_end().lines().count(), 4);
        let svg_text = std::fs::read_to_string(svg).unwrap();
        assert_eq!(svg_text.matches("<polyline").count(), 2);
    }

    #[test]
    fn emit_rejects_empty_log() {
        let dir = tempfile::tempdir().unwrap();
        let log = log_with(&[]);
        assert!(emit_curves(&log, dir.path(), "model").is_err());
    }

    #[test]
    fn svg_rejects_misaligned_series() {
        assert!(curves_svg(&[1.0], &[1.0, 2.0]).is_err());
        assert!(curves_svg(&[], &[]).is_err());
    }
}
