//! Training curves as standalone SVG.

use std::fmt::Write as _;

use clap::ValueEnum;
use lungcnn::metrics::MetricSummary;

use crate::runlog::RunRecord;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 56.0;
const TRAIN_COLOR: &str = "#1f77b4";
const VALIDATION_COLOR: &str = "#ff7f0e";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Metric {
    Accuracy,
    Auc,
    Recall,
    Loss,
}

impl Metric {
    pub fn of(self, m: &MetricSummary) -> f64 {
        match self {
            Metric::Accuracy => m.accuracy,
            Metric::Auc => m.auc,
            Metric::Recall => m.recall,
            Metric::Loss => m.loss,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Metric::Accuracy => "Accuracy",
            Metric::Auc => "AUC",
            Metric::Recall => "Recall",
            Metric::Loss => "Loss",
        }
    }
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - TOP - BOTTOM)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Up to ~10 integer epoch ticks.
fn epoch_ticks(first: usize, last: usize) -> Vec<usize> {
    let span = last - first;
    let step = (span / 10 + 1).max(1);
    let step = [1, 2, 5, 10, 20, 25, 50, 100, 200, 500, 1000]
        .into_iter()
        .find(|&s| s >= step)
        .unwrap_or(step);
    let mut ticks: Vec<usize> = (first..=last).filter(|e| e % step == 0).collect();
    if ticks.first() != Some(&first) {
        ticks.insert(0, first);
    }
    ticks
}

/// Train and validation curves of `metric` against epoch.
pub fn render(records: &[RunRecord], metric: Metric) -> String {
    let model = records.first().map_or("model", |r| r.model.as_str());
    let train: Vec<(f64, f64)> = records
        .iter()
        .map(|r| (r.epoch as f64, metric.of(&r.train)))
        .collect();
    let validation: Vec<(f64, f64)> = records
        .iter()
        .map(|r| (r.epoch as f64, metric.of(&r.validation)))
        .collect();

    let first = records.first().map_or(1, |r| r.epoch);
    let last = records.last().map_or(1, |r| r.epoch);
    let (x0, x1) = if first == last {
        (first as f64 - 0.5, first as f64 + 0.5)
    } else {
        (first as f64, last as f64)
    };
    let y1 = match metric {
        Metric::Loss => {
            let top = train.iter().chain(&validation).map(|p| p.1).fold(0.0, f64::max);
            if top > 0.0 {
                top * 1.05
            } else {
                1.0
            }
        }
        _ => 1.0,
    };
    let f = Frame { x0, x1, y0: 0.0, y1 };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="15">{} curve for {}</text>"#,
        WIDTH / 2.0,
        metric.label(),
        escape(model)
    );

    // axes
    let (ax0, ax1) = (LEFT, WIDTH - RIGHT);
    let (ay0, ay1) = (HEIGHT - BOTTOM, TOP);
    let _ = writeln!(
        s,
        r#"<g class="axes" stroke="black" fill="none"><line x1="{ax0}" y1="{ay0}" x2="{ax1}" y2="{ay0}"/><line x1="{ax0}" y1="{ay0}" x2="{ax0}" y2="{ay1}"/></g>"#
    );
    let _ = writeln!(s, r#"<g class="ticks">"#);
    for e in epoch_ticks(first, last) {
        let x = f.px(e as f64);
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{ay0}" x2="{x:.2}" y2="{:.0}" stroke="black"/><text x="{x:.2}" y="{:.0}" text-anchor="middle">{e}</text>"#,
            ay0 + 5.0,
            ay0 + 18.0
        );
    }
    for i in 0..=5 {
        let v = f.y1 * i as f64 / 5.0;
        let y = f.py(v);
        let label = match metric {
            Metric::Loss => format!("{v:.3}"),
            _ => format!("{v:.1}"),
        };
        let _ = writeln!(
            s,
            r##"<line x1="{:.0}" y1="{y:.2}" x2="{ax0}" y2="{y:.2}" stroke="black"/><line x1="{ax0}" y1="{y:.2}" x2="{ax1}" y2="{y:.2}" stroke="#dddddd"/><text x="{:.0}" y="{:.2}" text-anchor="end">{label}</text>"##,
            ax0 - 5.0,
            ax0 - 8.0,
            y + 4.0
        );
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.0}" text-anchor="middle">Epoch</text>"#,
        (ax0 + ax1) / 2.0,
        HEIGHT - 14.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        (ay0 + ay1) / 2.0,
        (ay0 + ay1) / 2.0,
        metric.label()
    );

    for (class, color, points) in [("train", TRAIN_COLOR, &train), ("validation", VALIDATION_COLOR, &validation)] {
        let pts: Vec<String> = points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", f.px(x), f.py(y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline class="{class}" fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            pts.join(" ")
        );
        if points.len() == 1 {
            let (x, y) = points[0];
            let _ = writeln!(
                s,
                r#"<circle class="{class}" cx="{:.2}" cy="{:.2}" r="4" fill="{color}"/>"#,
                f.px(x),
                f.py(y)
            );
        }
    }

    // legend
    let lx = ax1 - 130.0;
    let _ = writeln!(s, r#"<g class="legend">"#);
    for (i, (name, color)) in [("Training", TRAIN_COLOR), ("Validation", VALIDATION_COLOR)].iter().enumerate() {
        let y = TOP + 12.0 + 18.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{y}" x2="{:.0}" y2="{y}" stroke="{color}" stroke-width="2"/><text x="{:.0}" y="{:.0}">{name}</text>"#,
            lx + 24.0,
            lx + 30.0,
            y + 4.0
        );
    }
    let _ = writeln!(s, "</g>");
    s.push_str("</svg>\n");
    s
}
