//! CSV reports and SVG plots.

use std::io::Write;
use std::path::Path;

use playclone_core::benchmark::{EvalReport, PointSummary, SweepRow};
use playclone_core::coverage::CoverageCurve;
use playclone_core::pipeline::StepLog;

pub type CsvResult<T> = Result<T, csv::Error>;

fn f(x: f64) -> String {
    format!("{x:.6}")
}

/// `step,loss,grad_norm,wallclock`; `wallclock` is seconds since training began.
pub fn write_train_log<W: Write>(out: W, log: &[StepLog], wallclock: &[f64]) -> CsvResult<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["step", "loss", "grad_norm", "wallclock"])?;
    for (i, s) in log.iter().enumerate() {
        let t = wallclock.get(i).map_or(String::new(), |t| format!("{t:.3}"));
        w.write_record([s.step.to_string(), f(s.loss), f(s.grad_norm), t])?;
    }
    w.flush()?;
    Ok(())
}

/// One row per task, then an `average` row. Contains nothing run-dependent
/// besides the policy and eval settings, so equal runs give equal bytes.
pub fn write_eval_report<W: Write>(out: W, r: &EvalReport) -> CsvResult<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["task", "successes", "trials", "rate", "stderr"])?;
    for t in &r.tasks {
        let p = t.rate();
        let se = (p * (1.0 - p) / t.trials.max(1) as f64).sqrt();
        w.write_record([t.task.name().to_string(), t.successes.to_string(), t.trials.to_string(), f(p), f(se)])?;
    }
    let succ: usize = r.tasks.iter().map(|t| t.successes).sum();
    let trials: usize = r.tasks.iter().map(|t| t.trials).sum();
    w.write_record(["average".to_string(), succ.to_string(), trials.to_string(), f(r.average), f(r.stderr)])?;
    w.flush()?;
    Ok(())
}

/// `frames,hours,cumulative_unique,segment_tag`.
pub fn write_coverage<W: Write>(out: W, c: &CoverageCurve) -> CsvResult<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["frames", "hours", "cumulative_unique", "segment_tag"])?;
    for p in &c.points {
        w.write_record([p.frames.to_string(), f(c.hours(p.frames)), p.unique.to_string(), p.segment.clone()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep_rows<W: Write>(out: W, rows: &[SweepRow]) -> CsvResult<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["kind", "point", "seed", "average", "stderr", "reference_frames", "added_frames", "unique_bins", "error"])?;
    for r in rows {
        let head = [r.kind.name().to_string(), r.point.to_string(), r.seed.to_string()];
        let tail = match &r.outcome {
            Ok(o) => [f(o.report.average), f(o.report.stderr), o.reference_frames.to_string(), o.added_frames.to_string(), o.unique_bins.to_string(), String::new()],
            Err(e) => [String::new(), String::new(), String::new(), String::new(), String::new(), e.clone()],
        };
        w.write_record(head.iter().chain(&tail))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep_summary<W: Write>(out: W, kind: &str, points: &[PointSummary]) -> CsvResult<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["kind", "point", "mean", "stderr", "seeds", "failed"])?;
    for p in points {
        w.write_record([kind.to_string(), p.point.to_string(), f(p.mean), f(p.stderr), p.seeds.to_string(), p.failed.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_csv(path: &Path, fill: impl FnOnce(&mut Vec<u8>) -> CsvResult<()>) -> std::io::Result<()> {
    let mut buf = Vec::new();
    fill(&mut buf).map_err(std::io::Error::other)?;
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, buf)
}

/// A line with optional symmetric error bars.
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub errors: Option<Vec<f64>>,
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

/// Minimal SVG line chart.
pub fn svg_plot(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let (w, h, m) = (640.0, 420.0, 60.0);
    let all = series.iter().flat_map(|s| {
        let errs = s.errors.clone().unwrap_or_default();
        s.points.iter().enumerate().map(move |(i, &(x, y))| (x, y, errs.get(i).copied().unwrap_or(0.0))).collect::<Vec<_>>()
    });
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (x, y, e) in all {
        if !(x.is_finite() && y.is_finite()) {
            continue;
        }
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y - e);
        y1 = y1.max(y + e);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let px = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
    let py = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n\
         <line x1=\"{m}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n\
         <line x1=\"{m}\" y1=\"{m}\" x2=\"{m}\" y2=\"{}\" stroke=\"black\"/>\n\
         <text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n\
         <text x=\"16\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>\n",
        w / 2.0, escape(title), h - m, w - m, h - m, h - m, w / 2.0, h - 16.0, escape(x_label), h / 2.0, h / 2.0, escape(y_label)
    );
    for i in 0..=4 {
        let xv = x0 + (x1 - x0) * i as f64 / 4.0;
        let yv = y0 + (y1 - y0) * i as f64 / 4.0;
        s += &format!("<text x=\"{:.1}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", px(xv), h - m + 16.0, tick(xv));
        s += &format!("<text x=\"{}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>\n", m - 4.0, py(yv) + 4.0, tick(yv));
    }
    for (k, ser) in series.iter().enumerate() {
        let c = COLORS[k % COLORS.len()];
        let pts: Vec<String> = ser.points.iter().filter(|p| p.0.is_finite() && p.1.is_finite()).map(|&(x, y)| format!("{:.1},{:.1}", px(x), py(y))).collect();
        s += &format!("<polyline fill=\"none\" stroke=\"{c}\" stroke-width=\"2\" points=\"{}\"/>\n", pts.join(" "));
        if let Some(errs) = &ser.errors {
            for (&(x, y), &e) in ser.points.iter().zip(errs) {
                if x.is_finite() && y.is_finite() && e.is_finite() && e > 0.0 {
                    s += &format!("<line x1=\"{0:.1}\" y1=\"{1:.1}\" x2=\"{0:.1}\" y2=\"{2:.1}\" stroke=\"{c}\"/>\n", px(x), py(y - e), py(y + e));
                }
            }
        }
        s += &format!("<text x=\"{}\" y=\"{}\" fill=\"{c}\">{}</text>\n", w - m - 140.0, m + 16.0 * k as f64, escape(&ser.label));
    }
    s += "</svg>\n";
    s
}

fn tick(v: f64) -> String {
    if v.abs() >= 1000.0 || (v != 0.0 && v.abs() < 0.01) {
        format!("{v:.2e}")
    } else {
        format!("{v:.2}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use playclone_core::benchmark::TaskResult;
    use playclone_core::tasks::TaskId;

    #[test]
    fn eval_csv_has_every_task_and_average() {
        let tasks = TaskId::ALL.iter().map(|&task| TaskResult { task, successes: 1, trials: 4 }).collect();
        let r = EvalReport::from_results(tasks, 0, vec![1]);
        let mut buf = Vec::new();
        write_eval_report(&mut buf, &r).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 20);
        assert!(text.lines().last().unwrap().starts_with("average,18,72,0.250000,"));
    }

    #[test]
    fn plot_is_well_formed() {
        let s = svg_plot("a<b", "x", "y", &[Series { label: "s".into(), points: vec![(0.0, 1.0), (1.0, 2.0)], errors: Some(vec![0.1, 0.2]) }]);
        assert!(s.starts_with("<svg") && s.ends_with("</svg>\n"));
        assert!(s.contains("a&lt;b"));
        assert_eq!(s.matches("<polyline").count(), 1);
    }
}
