//! SVG line plots and a markdown summary for evaluation results.
//!
//! Output is plain text with fixed number formatting, so identical inputs
//! give identical bytes.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;
use crate::fsutil::{atomic_write, create_dir};
use crate::metrics::{DynamicsTable, EvalReport};
use crate::trials::Condition;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 56.0;

fn color(c: Condition) -> &'static str {
    match c {
        Condition::Concave => "#d62728",
        Condition::Nofill => "#ff7f0e",
        Condition::Convex => "#1f77b4",
        Condition::Nochange => "#7f7f7f",
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Series<'a> {
    label: String,
    color: &'a str,
    dashed: bool,
    values: Vec<f64>,
}

/// Line chart over categorical x positions.
fn line_chart(title: &str, x_label: &str, y_label: &str, x_ticks: &[String], y_range: (f64, f64), series: &[Series]) -> String {
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let n = x_ticks.len().max(1);
    let x_at = |i: usize| {
        if n == 1 {
            LEFT + plot_w / 2.0
        } else {
            LEFT + plot_w * i as f64 / (n - 1) as f64
        }
    };
    let (y0, y1) = y_range;
    let y_at = |v: f64| TOP + plot_h * (1.0 - (v - y0) / (y1 - y0));

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        LEFT + plot_w / 2.0,
        escape(title)
    );

    for k in 0..=4 {
        let v = y0 + (y1 - y0) * k as f64 / 4.0;
        let y = y_at(v);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/>"##,
            LEFT + plot_w
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{v:.2}</text>"#,
            LEFT - 6.0,
            y + 4.0
        );
    }
    let stride = n.div_ceil(13).max(1);
    for (i, t) in x_ticks.iter().enumerate() {
        if i % stride != 0 && i != n - 1 {
            continue;
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            x_at(i),
            TOP + plot_h + 16.0,
            escape(t)
        );
    }
    let _ = writeln!(
        s,
        r##"<rect x="{LEFT:.2}" y="{TOP:.2}" width="{plot_w:.2}" height="{plot_h:.2}" fill="none" stroke="#333333"/>"##
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 14.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0,
        escape(y_label)
    );

    for (k, ser) in series.iter().enumerate() {
        let points: Vec<String> = ser
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| format!("{:.2},{:.2}", x_at(i), y_at(v.clamp(y0, y1))))
            .collect();
        let dash = if ser.dashed { r#" stroke-dasharray="6 4""# } else { "" };
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="2"{dash}/>"#,
            points.join(" "),
            ser.color
        );
        for p in &points {
            let (x, y) = p.split_once(',').expect("point");
            let _ = writeln!(s, r#"<circle cx="{x}" cy="{y}" r="2.5" fill="{}"/>"#, ser.color);
        }
        let ly = TOP + 12.0 + 18.0 * k as f64;
        let lx = LEFT + plot_w + 14.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{}" stroke-width="2"{dash}/>"#,
            lx + 20.0,
            ser.color
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 26.0,
            ly + 4.0,
            escape(&ser.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn tau_label(t: f64) -> String {
    format!("{t}")
}

pub fn detection_svg(report: &EvalReport) -> String {
    let curve = &report.curve;
    let mut series: Vec<Series> = curve
        .rates
        .iter()
        .map(|(c, v)| Series {
            label: c.to_string(),
            color: color(*c),
            dashed: false,
            values: v.clone(),
        })
        .collect();
    if let Some(fa) = &curve.false_alarm {
        series.push(Series {
            label: "NOCHANGE (false alarm)".into(),
            color: color(Condition::Nochange),
            dashed: true,
            values: fa.clone(),
        });
    }
    let ticks: Vec<String> = curve.tau_grid.iter().map(|t| tau_label(*t)).collect();
    line_chart(
        &format!("Detection rate, observer {}", report.observer),
        "threshold tau (%)",
        "detection rate",
        &ticks,
        (0.0, 1.0),
        &series,
    )
}

pub fn dynamics_svg(table: &DynamicsTable) -> String {
    let series: Vec<Series> = table
        .conditions
        .iter()
        .enumerate()
        .map(|(j, c)| Series {
            label: c.to_string(),
            color: color(*c),
            dashed: false,
            values: table.mean_rac.iter().map(|row| row[j]).collect(),
        })
        .collect();
    let all = table.mean_rac.iter().flatten().copied();
    let lo = all.clone().fold(0.0f64, f64::min).floor();
    let hi = all.fold(1.0f64, f64::max);
    let hi = (hi * 4.0).ceil() / 4.0;
    line_chart(
        "Mean RAC per epoch",
        "epoch",
        "mean RAC",
        &table.epochs,
        (lo, hi.max(lo + 0.25)),
        &series,
    )
}

pub fn summary_markdown(report: &EvalReport, dynamics: Option<&DynamicsTable>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# Evaluation summary\n");
    let _ = writeln!(s, "- battery: `{}`", report.battery_id);
    let _ = writeln!(s, "- observer: `{}`", report.observer);
    let _ = writeln!(s, "- trials scored: {}", report.records.len());
    match &report.fit {
        Some(fit) => {
            let _ = writeln!(s, "- fitted tau*: {}% (RMSE {:.4})", fit.tau_star, fit.rmse);
        }
        None => {
            let _ = writeln!(s, "- fitted tau*: not computed (no human data)");
        }
    }
    let _ = writeln!(s, "\n## RAC by condition\n");
    let _ = writeln!(s, "| condition | n | mean RAC | median RAC |");
    let _ = writeln!(s, "|---|---:|---:|---:|");
    for (c, st) in &report.stats {
        let _ = writeln!(s, "| {c} | {} | {:.4} | {:.4} |", st.n, st.mean_rac, st.median_rac);
    }
    let nochange = report
        .records
        .iter()
        .filter(|r| r.condition == Condition::Nochange)
        .count();
    if let Some(fa) = &report.curve.false_alarm {
        let _ = writeln!(s, "\n## No-change false alarms\n");
        let _ = writeln!(s, "{nochange} no-change trials. False-alarm rate at selected thresholds:\n");
        let _ = writeln!(s, "| tau (%) | false-alarm rate |");
        let _ = writeln!(s, "|---:|---:|");
        for (t, r) in report.curve.tau_grid.iter().zip(fa) {
            let _ = writeln!(s, "| {t} | {r:.4} |");
        }
    }
    let _ = writeln!(s, "\n## Detection rate\n");
    let mut header = String::from("| tau (%) |");
    let mut rule = String::from("|---:|");
    for c in report.curve.rates.keys() {
        let _ = write!(header, " {c} |");
        rule.push_str("---:|");
    }
    let _ = writeln!(s, "{header}\n{rule}");
    for (i, t) in report.curve.tau_grid.iter().enumerate() {
        let mut row = format!("| {t} |");
        for rates in report.curve.rates.values() {
            let _ = write!(row, " {:.4} |", rates[i]);
        }
        let _ = writeln!(s, "{row}");
    }
    let _ = writeln!(s, "\n![detection curve](detection_curve.svg)");
    if let Some(d) = dynamics {
        let _ = writeln!(s, "\n## Mean RAC per epoch\n");
        let mut header = String::from("| epoch |");
        let mut rule = String::from("|---|");
        for c in &d.conditions {
            let _ = write!(header, " {c} |");
            rule.push_str("---:|");
        }
        let _ = writeln!(s, "{header}\n{rule}");
        for (e, row) in d.epochs.iter().zip(&d.mean_rac) {
            let mut line = format!("| {e} |");
            for v in row {
                let _ = write!(line, " {v:.4} |");
            }
            let _ = writeln!(s, "{line}");
        }
        let _ = writeln!(s, "\n![dynamics](dynamics.svg)");
    }
    s
}

/// Writes `detection_curve.svg`, `summary.md` and, with a dynamics table,
/// `dynamics.svg` into `out_dir`.
pub fn write_report(report: &EvalReport, dynamics: Option<&DynamicsTable>, out_dir: &Path) -> Result<()> {
    create_dir(out_dir)?;
    atomic_write(&out_dir.join("detection_curve.svg"), detection_svg(report).as_bytes())?;
    if let Some(d) = dynamics {
        atomic_write(&out_dir.join("dynamics.svg"), dynamics_svg(d).as_bytes())?;
    }
    atomic_write(&out_dir.join("summary.md"), summary_markdown(report, dynamics).as_bytes())
}
