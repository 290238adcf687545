//! Minimal SVG 1.1 charts. Output is plain text with fixed precision so the
//! same data always produces the same bytes.

use std::fmt::Write;

use orientkit::metrics::{BoxStats, DistributionSummary, RocPoint};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;

fn header(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(
        s,
        r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="24" text-anchor="middle" font-family="sans-serif" font-size="16">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    s
}

fn axes(s: &mut String, x_label: &str, y_label: &str, x_range: (f64, f64), y_range: (f64, f64)) {
    let (x0, y0) = (MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        s,
        r#"<line x1="{x0}" y1="{y0}" x2="{:.1}" y2="{y0}" stroke="black"/>"#,
        WIDTH - MARGIN
    );
    let _ = writeln!(
        s,
        r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{MARGIN}" stroke="black"/>"#
    );
    let label = |s: &mut String, x: f64, y: f64, anchor: &str, text: &str| {
        let _ = writeln!(
            s,
            r#"<text x="{x:.1}" y="{y:.1}" text-anchor="{anchor}" font-family="sans-serif" font-size="11">{}</text>"#,
            escape(text)
        );
    };
    label(s, x0, y0 + 16.0, "start", &format!("{:.3}", x_range.0));
    label(
        s,
        WIDTH - MARGIN,
        y0 + 16.0,
        "end",
        &format!("{:.3}", x_range.1),
    );
    label(s, x0 - 4.0, y0, "end", &format!("{:.3}", y_range.0));
    label(
        s,
        x0 - 4.0,
        MARGIN + 4.0,
        "end",
        &format!("{:.3}", y_range.1),
    );
    label(s, WIDTH / 2.0, HEIGHT - 12.0, "middle", x_label);
    label(s, 14.0, HEIGHT / 2.0, "middle", y_label);
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

pub fn histogram(title: &str, x_label: &str, summary: &DistributionSummary) -> String {
    let h = &summary.histogram;
    let mut s = header(title);
    let lo = h.edges[0];
    let hi = h.edges[h.edges.len() - 1];
    let peak = h.counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    axes(&mut s, x_label, "count", (lo, hi), (0.0, peak));

    let plot_w = WIDTH - 2.0 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let bar_w = plot_w / h.counts.len() as f64;
    for (i, &c) in h.counts.iter().enumerate() {
        let bar_h = plot_h * c as f64 / peak;
        let _ = writeln!(
            s,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#4c72b0" stroke="white"/>"##,
            MARGIN + bar_w * i as f64,
            HEIGHT - MARGIN - bar_h,
            bar_w,
            bar_h
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn boxplot(title: &str, y_label: &str, stats: &BoxStats) -> String {
    let mut s = header(title);
    let (lo, hi) = (
        stats.min,
        if stats.max > stats.min {
            stats.max
        } else {
            stats.min + 1.0
        },
    );
    axes(&mut s, "", y_label, (0.0, 1.0), (lo, hi));
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let y = |v: f64| HEIGHT - MARGIN - plot_h * (v - lo) / (hi - lo);
    let cx = WIDTH / 2.0;
    let half = 60.0;
    let _ = writeln!(
        s,
        r#"<line x1="{cx:.1}" y1="{:.2}" x2="{cx:.1}" y2="{:.2}" stroke="black"/>"#,
        y(stats.min),
        y(stats.max)
    );
    let _ = writeln!(
        s,
        r##"<rect x="{:.1}" y="{:.2}" width="{:.1}" height="{:.2}" fill="#dd8452" stroke="black"/>"##,
        cx - half,
        y(stats.q3),
        2.0 * half,
        y(stats.q1) - y(stats.q3)
    );
    for (v, width) in [(stats.min, 0.5), (stats.median, 1.0), (stats.max, 0.5)] {
        let _ = writeln!(
            s,
            r#"<line x1="{:.1}" y1="{:.2}" x2="{:.1}" y2="{:.2}" stroke="black" stroke-width="2"/>"#,
            cx - half * width,
            y(v),
            cx + half * width,
            y(v)
        );
    }
    let _ = writeln!(
        s,
        r#"<circle cx="{cx:.1}" cy="{:.2}" r="4" fill="black"/>"#,
        y(stats.mean)
    );
    s.push_str("</svg>\n");
    s
}

pub fn roc_curve(title: &str, points: &[RocPoint]) -> String {
    let mut s = header(title);
    axes(
        &mut s,
        "false accept rate",
        "true accept rate",
        (0.0, 1.0),
        (0.0, 1.0),
    );
    let plot_w = WIDTH - 2.0 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let mut path = format!("{:.2},{:.2}", MARGIN, HEIGHT - MARGIN);
    for p in points {
        let _ = write!(
            path,
            " {:.2},{:.2}",
            MARGIN + plot_w * p.far,
            HEIGHT - MARGIN - plot_h * p.tar
        );
    }
    let _ = writeln!(
        s,
        r##"<polyline points="{path}" fill="none" stroke="#c44e52" stroke-width="2"/>"##
    );
    s.push_str("</svg>\n");
    s
}
