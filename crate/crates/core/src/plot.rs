//! Static SVG rendering of a labeled signal: trace, label band, noise-level
//! track and artifact spans. Output depends only on the input.

use std::fmt::Write as _;
use std::path::Path;

use crate::assembly::{LabeledBiosignal, SegLabel};
use crate::error::Result;

const WIDTH: f64 = 1200.0;
const MARGIN: f64 = 40.0;
const TRACE_H: f64 = 240.0;
const BAND_H: f64 = 24.0;
const LEVEL_H: f64 = 80.0;
const GAP: f64 = 12.0;

fn label_color(label: SegLabel) -> &'static str {
    match label {
        SegLabel::None => "#ffffff",
        SegLabel::P => "#4e79a7",
        SegLabel::Qrs => "#e15759",
        SegLabel::T => "#59a14f",
        SegLabel::Systole => "#f28e2b",
        SegLabel::Diastole => "#76b7b2",
    }
}

fn quality_color(q: u8) -> &'static str {
    match q {
        1 => "#59a14f",
        2 => "#edc948",
        _ => "#e15759",
    }
}

/// SVG document for `signal`.
pub fn render_svg(signal: &LabeledBiosignal) -> String {
    let n = signal.samples.len().max(1);
    let plot_w = WIDTH - 2.0 * MARGIN;
    let x_of = |i: f64| MARGIN + plot_w * i / n as f64;
    let band_y = MARGIN + TRACE_H + GAP;
    let level_y = band_y + BAND_H + GAP;
    let height = level_y + LEVEL_H + MARGIN;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}">"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{MARGIN}" y="24" font-family="sans-serif" font-size="14">{} {:.2} s at {} Hz</text>"#,
        signal.modality,
        signal.duration(),
        signal.fs
    );

    // artifact spans behind the trace
    for span in &signal.artifact_spans {
        let (x0, x1) = (x_of(span.start as f64), x_of(span.end as f64));
        let _ = writeln!(
            s,
            r##"<rect class="artifact" data-start="{}" data-end="{}" x="{x0:.2}" y="{MARGIN}" width="{:.2}" height="{TRACE_H}" fill="#bab0ac" fill-opacity="0.4"/>"##,
            span.start,
            span.end,
            x1 - x0
        );
    }

    let min = signal.samples.iter().copied().fold(f64::INFINITY, f64::min);
    let max = signal.samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = if max > min { max - min } else { 1.0 };
    let mut points = String::new();
    for (i, v) in signal.samples.iter().enumerate() {
        let y = MARGIN + TRACE_H * (1.0 - (v - min) / range);
        let _ = write!(points, "{:.2},{:.2} ", x_of(i as f64), y);
    }
    let _ = writeln!(
        s,
        r##"<polyline class="trace" fill="none" stroke="#1f1f1f" stroke-width="1" points="{}"/>"##,
        points.trim_end()
    );

    // label band as runs
    let mut start = 0;
    for i in 1..=signal.seg_labels.len() {
        if i == signal.seg_labels.len() || signal.seg_labels[i] != signal.seg_labels[start] {
            let label = signal.seg_labels[start];
            if label != SegLabel::None {
                let _ = writeln!(
                    s,
                    r#"<rect class="label {}" x="{:.2}" y="{band_y}" width="{:.2}" height="{BAND_H}" fill="{}"/>"#,
                    label.as_str(),
                    x_of(start as f64),
                    x_of(i as f64) - x_of(start as f64),
                    label_color(label)
                );
            }
            start = i;
        }
    }

    let peak = signal.noise_level.iter().copied().fold(0.0, f64::max);
    for (w, (&level, &q)) in signal.noise_level.iter().zip(&signal.quality).enumerate() {
        let x0 = x_of((w * signal.window) as f64);
        let x1 = x_of(((w + 1) * signal.window).min(n) as f64);
        let h = if peak > 0.0 { LEVEL_H * level / peak } else { 0.0 };
        let _ = writeln!(
            s,
            r#"<rect class="quality q{q}" x="{x0:.2}" y="{:.2}" width="{:.2}" height="{h:.2}" fill="{}"/>"#,
            level_y + LEVEL_H - h,
            x1 - x0,
            quality_color(q)
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn emit_plot(signal: &LabeledBiosignal, path: &Path) -> Result<()> {
    std::fs::write(path, render_svg(signal))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::intervals::BeatIntervalSeries;
    use crate::noise::ArtifactSpan;
    use crate::pipeline::{modality_default_recipe, render_recipe, NoiseSources};
    use crate::waveform::Modality;

    #[test]
    fn single_beat_signal_plots() {
        let series = BeatIntervalSeries::from_intervals(&[1.0]).unwrap();
        let mut r = modality_default_recipe(Modality::Ecg, 1.0, 0);
        r.intervals = crate::randomization::IntervalSource::Replay {
            intervals: series.intervals().to_vec(),
        };
        let sig = render_recipe(&r, &NoiseSources::new()).unwrap();
        let svg = render_svg(&sig);
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert!(svg.contains("class=\"label QRS\""));
    }

    #[test]
    fn artifact_is_marked_and_output_is_stable() {
        let mut sig = render_recipe(&modality_default_recipe(Modality::Ppg, 5.0, 3), &NoiseSources::new()).unwrap();
        sig.artifact_spans.push(ArtifactSpan {
            start: 100,
            end: 300,
            strength: 0.5,
            source: "x".into(),
            source_offset: 0,
        });
        let a = render_svg(&sig);
        assert!(a.contains(r#"class="artifact" data-start="100" data-end="300""#));
        assert_eq!(a, render_svg(&sig));
    }
}
