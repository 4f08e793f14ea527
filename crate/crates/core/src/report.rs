//! CSV and SVG output. Every writer is a pure function of its input, so
//! rerunning on the same data reproduces the same bytes.
//!
//! Numbers are printed with six decimals throughout.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::env::{BallColor, Goal};
use crate::error::{Error, Result};
use crate::experiment::{Condition, MetricsPoint, MetricsSeries};
use crate::learner::{EpisodeRecord, LearnerMode};
use crate::policy::GoalConditionedPolicy;
use crate::tutor::TutorMode;

pub const METRICS_HEADER: [&str; 6] = [
    "episode",
    "tutor",
    "learner",
    "seed",
    "predictability",
    "reachability",
];

pub const POLICY_HEADER: [&str; 5] = ["goal", "slot", "given_first", "color", "probability"];

pub const RUN_HEADER: [&str; 11] = [
    "episode",
    "desired",
    "demo_first",
    "demo_second",
    "predicted",
    "played_first",
    "played_second",
    "outcome",
    "prediction_reward",
    "action_reward",
    "detector_event",
];

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;

fn fixed(x: f64) -> String {
    format!("{x:.6}")
}

/// A header plus rows of equal length.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        CsvTable {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push_row(&mut self, row: Vec<String>) -> Result<()> {
        if row.len() != self.header.len() {
            return Err(Error::InvalidArgument(format!(
                "row has {} cells, header has {}",
                row.len(),
                self.header.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    /// Serializes the table, preceded by `# key: value` comment lines.
    pub fn to_csv_string(&self, comments: &[(&str, String)]) -> String {
        let mut out = Vec::new();
        for (k, v) in comments {
            out.extend_from_slice(format!("# {k}: {v}\n").as_bytes());
        }
        {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(&self.header).expect("writing to memory");
            for row in &self.rows {
                w.write_record(row).expect("writing to memory");
            }
            w.flush().expect("writing to memory");
        }
        String::from_utf8(out).expect("cells are utf-8")
    }

    /// Parses a table, skipping `#` comment lines.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let header = r
            .headers()
            .map_err(|e| csv_error(&e))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut table = CsvTable {
            header,
            rows: Vec::new(),
        };
        for rec in r.records() {
            let rec = rec.map_err(|e| csv_error(&e))?;
            table.rows.push(rec.iter().map(str::to_string).collect());
        }
        Ok(table)
    }
}

fn csv_error(e: &csv::Error) -> Error {
    Error::Csv {
        line: e.position().map_or(0, |p| p.line() as usize),
        reason: e.to_string(),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn metrics_csv_string<'a>(series: impl IntoIterator<Item = &'a MetricsSeries>) -> String {
    let mut rows: Vec<(Condition, u64, &MetricsPoint)> = series
        .into_iter()
        .flat_map(|s| s.points.iter().map(move |p| (s.condition, s.seed, p)))
        .collect();
    rows.sort_by_key(|(c, seed, p)| (c.tutor, c.learner, *seed, p.episode));
    let mut table = CsvTable::new(&METRICS_HEADER);
    for (c, seed, p) in rows {
        table.rows.push(vec![
            p.episode.to_string(),
            c.tutor.to_string(),
            c.learner.to_string(),
            seed.to_string(),
            fixed(p.predictability),
            fixed(p.reachability),
        ]);
    }
    table.to_csv_string(&[])
}

/// One row per evaluation point, sorted by tutor, learner, seed, episode.
pub fn write_metrics_csv<'a>(
    series: impl IntoIterator<Item = &'a MetricsSeries>,
    path: &Path,
) -> Result<()> {
    write_file(path, &metrics_csv_string(series))
}

pub fn parse_metrics_csv(text: &str) -> Result<Vec<MetricsSeries>> {
    let table = CsvTable::from_csv_str(text)?;
    if table.header != METRICS_HEADER {
        return Err(Error::Csv {
            line: 1,
            reason: format!("expected header {}", METRICS_HEADER.join(",")),
        });
    }
    let mut grouped: BTreeMap<(Condition, u64), Vec<MetricsPoint>> = BTreeMap::new();
    for (i, row) in table.rows.iter().enumerate() {
        let line = i + 2;
        let bad = |what: &str| Error::Csv {
            line,
            reason: format!("bad {what}"),
        };
        let tutor: TutorMode = row[1].parse().map_err(|_| bad("tutor"))?;
        let learner: LearnerMode = row[2].parse().map_err(|_| bad("learner"))?;
        let point = MetricsPoint {
            episode: row[0].parse().map_err(|_| bad("episode"))?,
            predictability: row[4].parse().map_err(|_| bad("predictability"))?,
            reachability: row[5].parse().map_err(|_| bad("reachability"))?,
        };
        let seed: u64 = row[3].parse().map_err(|_| bad("seed"))?;
        grouped
            .entry((Condition::new(tutor, learner), seed))
            .or_default()
            .push(point);
    }
    Ok(grouped
        .into_iter()
        .map(|((condition, seed), points)| MetricsSeries {
            condition,
            seed,
            points,
        })
        .collect())
}

pub fn read_metrics_csv(path: &Path) -> Result<Vec<MetricsSeries>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_metrics_csv(&text)
}

/// `{tutor}_{learner}_seed{N}.csv`
pub fn run_csv_name(condition: Condition, seed: u64) -> String {
    format!("{}_{}_seed{seed}.csv", condition.tutor, condition.learner)
}

pub fn run_csv_string(records: &[EpisodeRecord]) -> String {
    let mut table = CsvTable::new(&RUN_HEADER);
    for r in records {
        table.rows.push(vec![
            r.episode.to_string(),
            r.desired.to_string(),
            r.demo.first.to_string(),
            r.demo.second.to_string(),
            r.predicted.to_string(),
            r.played.first.to_string(),
            r.played.second.to_string(),
            r.outcome.to_string(),
            fixed(r.prediction_reward),
            fixed(r.action_reward),
            u8::from(r.detector_event).to_string(),
        ]);
    }
    table.to_csv_string(&[])
}

pub fn write_run_csv(records: &[EpisodeRecord], path: &Path) -> Result<()> {
    write_file(path, &run_csv_string(records))
}

/// First-pick probabilities (`given_first` = `-`), then second-pick
/// probabilities per first pick, for each goal.
pub fn policy_csv_string(policy: &GoalConditionedPolicy, comments: &[(&str, String)]) -> String {
    let mut table = CsvTable::new(&POLICY_HEADER);
    for g in Goal::ALL {
        let t = policy.table(g);
        let first = t.first_dist();
        for c in BallColor::ALL {
            table.rows.push(vec![
                g.to_string(),
                "first".into(),
                "-".into(),
                c.to_string(),
                fixed(first.prob(c)),
            ]);
        }
        for r in BallColor::ALL {
            let second = t.second_dist(r);
            for c in BallColor::ALL {
                table.rows.push(vec![
                    g.to_string(),
                    "second".into(),
                    r.to_string(),
                    c.to_string(),
                    fixed(second.prob(c)),
                ]);
            }
        }
    }
    table.to_csv_string(comments)
}

pub fn write_policy_csv(
    policy: &GoalConditionedPolicy,
    comments: &[(&str, String)],
    path: &Path,
) -> Result<()> {
    write_file(path, &policy_csv_string(policy, comments))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn ball_fill(c: BallColor) -> &'static str {
    match c {
        BallColor::Purple => "#7b3fa0",
        BallColor::Orange => "#f08a24",
        BallColor::Pink => "#f29bc4",
    }
}

fn svg_open(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">
<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>
<text x="{:.2}" y="24" text-anchor="middle" font-size="16">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

/// Four panels for one goal: the first pick, then the second pick given
/// each possible first pick.
pub fn policy_bars_svg(policy: &GoalConditionedPolicy, goal: Goal) -> String {
    let t = policy.table(goal);
    let mut panels = vec![("first pick".to_string(), t.first_dist())];
    for r in BallColor::ALL {
        panels.push((format!("second pick | {r}"), t.second_dist(r)));
    }

    let mut out = String::new();
    svg_open(&mut out, &format!("policy for goal {goal}"));
    let (left, right, top, bottom) = (50.0, 20.0, 60.0, 60.0);
    let panel_w = (WIDTH - left - right) / panels.len() as f64;
    let plot_h = HEIGHT - top - bottom;
    let base = top + plot_h;
    let bar_w = panel_w * 0.8 / 3.0;

    // shared probability axis
    for k in 0..=4 {
        let v = k as f64 / 4.0;
        let y = base - v * plot_h;
        let _ = writeln!(
            out,
            r##"<line x1="{left:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/>
<text x="{:.2}" y="{:.2}" text-anchor="end">{v:.2}</text>"##,
            WIDTH - right,
            left - 6.0,
            y + 4.0
        );
    }

    for (i, (label, dist)) in panels.iter().enumerate() {
        let x0 = left + i as f64 * panel_w + panel_w * 0.1;
        let _ = writeln!(out, r#"<g class="panel">"#);
        for (j, c) in BallColor::ALL.into_iter().enumerate() {
            let h = dist.prob(c) * plot_h;
            let x = x0 + j as f64 * bar_w;
            let _ = writeln!(
                out,
                r##"<rect class="bar" x="{x:.2}" y="{:.2}" width="{:.2}" height="{h:.2}" fill="{}" stroke="#333333"><title>{c}: {:.6}</title></rect>"##,
                base - h,
                bar_w * 0.9,
                ball_fill(c),
                dist.prob(c)
            );
        }
        let _ = writeln!(
            out,
            r##"<line x1="{x0:.2}" y1="{base:.2}" x2="{:.2}" y2="{base:.2}" stroke="#333333"/>
<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>
</g>"##,
            x0 + 3.0 * bar_w,
            x0 + 1.5 * bar_w,
            base + 24.0,
            escape(label)
        );
    }
    out.push_str("</svg>\n");
    out
}

pub fn render_policy_bars(policy: &GoalConditionedPolicy, goal: Goal, path: &Path) -> Result<()> {
    write_file(path, &policy_bars_svg(policy, goal))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    Predictability,
    Reachability,
}

impl Metric {
    pub const fn name(self) -> &'static str {
        match self {
            Metric::Predictability => "predictability",
            Metric::Reachability => "reachability",
        }
    }

    fn of(self, p: &MetricsPoint) -> f64 {
        match self {
            Metric::Predictability => p.predictability,
            Metric::Reachability => p.reachability,
        }
    }
}

/// Per-episode mean and population standard deviation across seeds.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveSummary {
    pub episodes: Vec<usize>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

pub fn summarize(series: &[&MetricsSeries], metric: Metric) -> Result<CurveSummary> {
    let first = series
        .first()
        .ok_or_else(|| Error::InvalidArgument("no series to summarize".into()))?;
    let episodes: Vec<usize> = first.points.iter().map(|p| p.episode).collect();
    for s in series {
        if s.points
            .iter()
            .map(|p| p.episode)
            .ne(episodes.iter().copied())
        {
            return Err(Error::InvalidArgument(format!(
                "seed {} of {} has a different evaluation schedule",
                s.seed, s.condition
            )));
        }
    }
    let n = series.len() as f64;
    let mut mean = Vec::with_capacity(episodes.len());
    let mut std = Vec::with_capacity(episodes.len());
    for k in 0..episodes.len() {
        let m = series.iter().map(|s| metric.of(&s.points[k])).sum::<f64>() / n;
        let var = series
            .iter()
            .map(|s| (metric.of(&s.points[k]) - m).powi(2))
            .sum::<f64>()
            / n;
        mean.push(m);
        std.push(var.sqrt());
    }
    Ok(CurveSummary {
        episodes,
        mean,
        std,
    })
}

fn condition_stroke(c: Condition) -> &'static str {
    match (c.tutor, c.learner) {
        (TutorMode::Naive, LearnerMode::Literal) => "#1f77b4",
        (TutorMode::Naive, LearnerMode::Pragmatic) => "#2ca02c",
        (TutorMode::Pedagogical, LearnerMode::Literal) => "#ff7f0e",
        (TutorMode::Pedagogical, LearnerMode::Pragmatic) => "#d62728",
    }
}

/// Mean curve per condition with a ±1 std band, y fixed to [0, 1].
pub fn learning_curves_svg<'a>(
    series: impl IntoIterator<Item = &'a MetricsSeries>,
    metric: Metric,
) -> Result<String> {
    let mut by_cond: BTreeMap<Condition, Vec<&MetricsSeries>> = BTreeMap::new();
    for s in series {
        by_cond.entry(s.condition).or_default().push(s);
    }
    if by_cond.is_empty() {
        return Err(Error::InvalidArgument("no series to plot".into()));
    }
    let summaries = by_cond
        .iter()
        .map(|(c, s)| Ok((*c, summarize(s, metric)?)))
        .collect::<Result<Vec<_>>>()?;

    let x_min = summaries
        .iter()
        .filter_map(|(_, s)| s.episodes.first())
        .min()
        .copied()
        .unwrap_or(0);
    let x_max = summaries
        .iter()
        .filter_map(|(_, s)| s.episodes.last())
        .max()
        .copied()
        .unwrap_or(0);
    let span = (x_max - x_min).max(1) as f64;

    let (left, right, top, bottom) = (60.0, 190.0, 50.0, 50.0);
    let plot_w = WIDTH - left - right;
    let plot_h = HEIGHT - top - bottom;
    let px = |e: usize| left + (e - x_min) as f64 / span * plot_w;
    let py = |v: f64| top + (1.0 - v.clamp(0.0, 1.0)) * plot_h;

    let mut out = String::new();
    svg_open(&mut out, metric.name());
    for k in 0..=4 {
        let v = k as f64 / 4.0;
        let _ = writeln!(
            out,
            r##"<line x1="{left:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/>
<text x="{:.2}" y="{:.2}" text-anchor="end">{v:.2}</text>"##,
            left + plot_w,
            left - 6.0,
            py(v) + 4.0,
            y = py(v)
        );
    }
    for k in 0..=4 {
        let e = x_min + (x_max - x_min) * k / 4;
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{e}</text>"#,
            px(e),
            top + plot_h + 18.0
        );
    }
    let _ = writeln!(
        out,
        r##"<rect x="{left:.2}" y="{top:.2}" width="{plot_w:.2}" height="{plot_h:.2}" fill="none" stroke="#333333"/>
<text x="{:.2}" y="{:.2}" text-anchor="middle">episode</text>
<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"##,
        left + plot_w / 2.0,
        HEIGHT - 12.0,
        top + plot_h / 2.0,
        top + plot_h / 2.0,
        metric.name()
    );

    for (cond, s) in &summaries {
        let color = condition_stroke(*cond);
        let upper = s
            .episodes
            .iter()
            .zip(&s.mean)
            .zip(&s.std)
            .map(|((&e, m), sd)| (px(e), py(m + sd)));
        let lower = s
            .episodes
            .iter()
            .zip(&s.mean)
            .zip(&s.std)
            .rev()
            .map(|((&e, m), sd)| (px(e), py(m - sd)));
        let band: Vec<String> = upper
            .chain(lower)
            .map(|(x, y)| format!("{x:.2},{y:.2}"))
            .collect();
        let line: Vec<String> = s
            .episodes
            .iter()
            .zip(&s.mean)
            .map(|(&e, &m)| format!("{:.2},{:.2}", px(e), py(m)))
            .collect();
        let _ = writeln!(
            out,
            r#"<g class="condition" id="{}_{}">
<polygon class="band" points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>
<polyline class="mean" points="{}" fill="none" stroke="{color}" stroke-width="2"/>
</g>"#,
            cond.tutor,
            cond.learner,
            band.join(" "),
            line.join(" ")
        );
    }

    let lx = left + plot_w + 20.0;
    let _ = writeln!(out, r#"<g class="legend">"#);
    for (i, (cond, _)) in summaries.iter().enumerate() {
        let y = top + 20.0 + i as f64 * 22.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{}" stroke-width="3"/>
<text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 24.0,
            condition_stroke(*cond),
            lx + 30.0,
            y + 4.0,
            escape(&cond.to_string())
        );
    }
    out.push_str("</g>\n</svg>\n");
    Ok(out)
}

pub fn render_learning_curves<'a>(
    series: impl IntoIterator<Item = &'a MetricsSeries>,
    metric: Metric,
    path: &Path,
) -> Result<()> {
    write_file(path, &learning_curves_svg(series, metric)?)
}
