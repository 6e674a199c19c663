//! Data-distribution histograms, error aggregation and the result tables.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::datagen::Method;
use crate::envs::{EnvName, EnvSpec};
use crate::error::{Error, Result};

pub const DEFAULT_BINS: usize = 30;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub dim_label: String,
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    /// Samples outside `[low, high]`, including NaN.
    pub overflow: u64,
}

impl Histogram {
    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn in_range(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn total(&self) -> u64 {
        self.in_range() + self.overflow
    }

    /// Counts divided by `in_range · bin_width`, so the bars integrate to
    /// one. All zeros for an empty histogram.
    pub fn density(&self) -> Vec<f64> {
        let n = self.in_range();
        self.counts
            .iter()
            .zip(self.bin_edges.windows(2))
            .map(|(&c, e)| {
                if n == 0 {
                    0.0
                } else {
                    c as f64 / (n as f64 * (e[1] - e[0]))
                }
            })
            .collect()
    }
}

/// Equal-width histogram over `[low, high]`; the last bin includes `high`.
pub fn histogram(
    dim_label: &str,
    samples: &[f64],
    n_bins: usize,
    (low, high): (f64, f64),
) -> Result<Histogram> {
    if n_bins == 0 {
        return Err(Error::Config("histogram needs at least one bin".into()));
    }
    if !(low < high) || !low.is_finite() || !high.is_finite() {
        return Err(Error::Config(format!("invalid histogram range [{low}, {high}]")));
    }
    let width = (high - low) / n_bins as f64;
    let mut bin_edges: Vec<f64> = (0..n_bins).map(|i| low + i as f64 * width).collect();
    bin_edges.push(high);

    let mut counts = vec![0u64; n_bins];
    let mut overflow = 0;
    for &x in samples {
        if !(low..=high).contains(&x) {
            overflow += 1;
            continue;
        }
        // Arithmetic guess, then settle against the stored edges so the
        // assignment agrees with them exactly.
        let mut i = (((x - low) / width) as usize).min(n_bins - 1);
        while i > 0 && x < bin_edges[i] {
            i -= 1;
        }
        while i + 1 < n_bins && x >= bin_edges[i + 1] {
            i += 1;
        }
        counts[i] += 1;
    }
    Ok(Histogram {
        dim_label: dim_label.to_string(),
        bin_edges,
        counts,
        overflow,
    })
}

/// Share of actions with at least one coordinate within
/// `fraction · (high − low)` of either edge of the action box.
pub fn boundary_mass<A: AsRef<[f64]>>(actions: &[A], spec: &EnvSpec, fraction: f64) -> Result<f64> {
    if !(fraction > 0.0 && fraction < 0.5) {
        return Err(Error::Usage(format!("boundary fraction {fraction} outside (0, 0.5)")));
    }
    if actions.is_empty() {
        return Ok(0.0);
    }
    let mut near = 0usize;
    for a in actions {
        let a = a.as_ref();
        if a.len() != spec.action_dim {
            return Err(Error::shape("boundary_mass action", spec.action_dim, a.len()));
        }
        let hit = a.iter().enumerate().any(|(i, &v)| {
            let (lo, hi) = (spec.action_low[i], spec.action_high[i]);
            let margin = fraction * (hi - lo);
            v <= lo + margin || v >= hi - margin
        });
        near += hit as usize;
    }
    Ok(near as f64 / actions.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aggregate {
    pub mean: f64,
    /// Population standard deviation across repetitions.
    pub std: f64,
}

/// Mean over trajectories within each repetition, then mean and population
/// standard deviation across repetitions.
pub fn aggregate<R: AsRef<[f64]>>(per_repetition: &[R]) -> Result<Aggregate> {
    if per_repetition.is_empty() {
        return Err(Error::Usage("aggregate needs at least one repetition".into()));
    }
    let mut rep_means = Vec::with_capacity(per_repetition.len());
    for r in per_repetition {
        let r = r.as_ref();
        if r.is_empty() {
            return Err(Error::Usage("repetition without trajectories".into()));
        }
        rep_means.push(r.iter().sum::<f64>() / r.len() as f64);
    }
    // Sorting fixes the summation order, so the result does not depend on
    // the order repetitions are listed in.
    rep_means.sort_by(f64::total_cmp);
    let n = rep_means.len() as f64;
    let mean = rep_means.iter().sum::<f64>() / n;
    let var = rep_means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / n;
    Ok(Aggregate {
        mean,
        std: var.sqrt(),
    })
}

/// One trajectory error line of `errors.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub env: EnvName,
    pub method: Method,
    pub budget: usize,
    pub horizon: usize,
    pub repetition: usize,
    pub trajectory_id: usize,
    pub error: f64,
    pub diverged: bool,
    /// Same error restricted to the outcome dimensions.
    pub outcome_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub environment: EnvName,
    pub method: Method,
    pub budget: usize,
    pub horizon: usize,
    pub mean_error: f64,
    pub std_error: f64,
    pub n_repetitions: usize,
    pub divergence_count: usize,
}

/// Which error column of `errors.csv` to aggregate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    FullState,
    Outcome,
}

/// Groups rows by (env, method, budget, horizon) and aggregates each
/// group over repetitions. Records come out sorted by env, budget, horizon
/// and method.
pub fn records_from_errors(rows: &[ErrorRow], kind: ErrorKind) -> Result<Vec<MetricsRecord>> {
    type Key = (EnvName, usize, usize, Method);
    let mut groups: BTreeMap<Key, (BTreeMap<usize, Vec<(usize, f64)>>, usize)> = BTreeMap::new();
    for r in rows {
        let (reps, diverged) = groups
            .entry((r.env, r.budget, r.horizon, r.method))
            .or_default();
        let value = match kind {
            ErrorKind::FullState => r.error,
            ErrorKind::Outcome => r.outcome_error,
        };
        reps.entry(r.repetition).or_default().push((r.trajectory_id, value));
        *diverged += r.diverged as usize;
    }
    groups
        .into_iter()
        .map(|((env, budget, horizon, method), (reps, diverged))| {
            let per_rep: Vec<Vec<f64>> = reps
                .into_values()
                .map(|mut v| {
                    v.sort_by_key(|&(id, _)| id);
                    v.into_iter().map(|(_, e)| e).collect()
                })
                .collect();
            let agg = aggregate(&per_rep)?;
            Ok(MetricsRecord {
                environment: env,
                method,
                budget,
                horizon,
                mean_error: agg.mean,
                std_error: agg.std,
                n_repetitions: per_rep.len(),
                divergence_count: diverged,
            })
        })
        .collect()
}

/// One line of `table.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub env: EnvName,
    pub budget: usize,
    pub horizon: usize,
    pub method: Method,
    pub mean: f64,
    pub std: f64,
}

impl From<&MetricsRecord> for TableRow {
    fn from(r: &MetricsRecord) -> Self {
        TableRow {
            env: r.environment,
            budget: r.budget,
            horizon: r.horizon,
            method: r.method,
            mean: r.mean_error,
            std: r.std_error,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RenderedTable {
    pub text: String,
    pub csv: String,
}

/// Budgets, horizons and methods spanned by a set of records.
pub fn grid_of(records: &[MetricsRecord]) -> (Vec<usize>, Vec<usize>, Vec<Method>) {
    let budgets: BTreeSet<usize> = records.iter().map(|r| r.budget).collect();
    let horizons: BTreeSet<usize> = records.iter().map(|r| r.horizon).collect();
    let methods: BTreeSet<Method> = records.iter().map(|r| r.method).collect();
    (
        budgets.into_iter().collect(),
        horizons.into_iter().collect(),
        methods.into_iter().collect(),
    )
}

/// Renders one environment's table over the full grid spanned by the
/// records and all three methods.
pub fn render_table(records: &[MetricsRecord]) -> Result<RenderedTable> {
    let (budgets, horizons, _) = grid_of(records);
    render_table_for_grid(records, &budgets, &horizons, &Method::ALL)
}

pub fn render_table_for_grid(
    records: &[MetricsRecord],
    budgets: &[usize],
    horizons: &[usize],
    methods: &[Method],
) -> Result<RenderedTable> {
    let env = match records.first() {
        Some(r) => r.environment,
        None => return Err(Error::Reporting("no records to tabulate".into())),
    };
    if let Some(other) = records.iter().find(|r| r.environment != env) {
        return Err(Error::Reporting(format!(
            "records mix environments {env} and {}",
            other.environment
        )));
    }
    let mut cells: BTreeMap<(usize, usize, Method), &MetricsRecord> = BTreeMap::new();
    for r in records {
        if cells.insert((r.budget, r.horizon, r.method), r).is_some() {
            return Err(Error::Reporting(format!(
                "duplicate cell (budget {}, horizon {}, method {})",
                r.budget, r.horizon, r.method
            )));
        }
    }
    let mut missing = Vec::new();
    for &b in budgets {
        for &h in horizons {
            for &m in methods {
                if !cells.contains_key(&(b, h, m)) {
                    missing.push(format!("(budget {b}, horizon {h}, method {m})"));
                }
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::Reporting(format!(
            "{}: missing grid cells {}",
            env,
            missing.join(", ")
        )));
    }

    let mut header = vec!["Initialization episodes".to_string(), "Prediction horizon".to_string()];
    header.extend(methods.iter().map(|m| m.title().to_string()));
    let mut rows = Vec::new();
    for &b in budgets {
        for &h in horizons {
            let mut row = vec![b.to_string(), h.to_string()];
            for &m in methods {
                let r = cells[&(b, h, m)];
                row.push(format!("{:.3} ± {:.3}", r.mean_error, r.std_error));
            }
            rows.push(row);
        }
    }
    let widths: Vec<usize> = (0..header.len())
        .map(|c| {
            rows.iter()
                .map(|r| r[c].chars().count())
                .chain([header[c].chars().count()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let line = |cells: &[String]| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, &w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
            .collect();
        format!("| {} |", padded.join(" | "))
    };
    let rule = format!(
        "|{}|",
        widths.iter().map(|w| "-".repeat(w + 2)).collect::<Vec<_>>().join("|")
    );
    let mut text = format!("Mean prediction error on {}\n\n", env.title());
    text.push_str(&line(&header));
    text.push('\n');
    text.push_str(&rule);
    text.push('\n');
    for r in &rows {
        text.push_str(&line(r));
        text.push('\n');
    }

    let table_rows: Vec<TableRow> = budgets
        .iter()
        .flat_map(|&b| horizons.iter().map(move |&h| (b, h)))
        .flat_map(|(b, h)| methods.iter().map(move |&m| (b, h, m)))
        .map(|key| TableRow::from(cells[&key]))
        .collect();
    Ok(RenderedTable {
        text,
        csv: write_csv(&table_rows)?,
    })
}

pub fn write_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for r in rows {
        writer
            .serialize(r)
            .map_err(|e| Error::Reporting(format!("csv encoding failed: {e}")))?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| Error::Reporting(format!("csv encoding failed: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Parses CSV text with a header line into rows; `origin` names the source
/// in error messages.
pub fn parse_csv<T: for<'de> Deserialize<'de>>(text: &str, origin: &str) -> Result<Vec<T>> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| Error::format(origin, format!("record {}: {e}", i + 1))))
        .collect()
}

/// Histogram CSV with one count column per method, in the order given.
pub fn histogram_csv(hists: &[(Method, &Histogram)], density: bool) -> Result<String> {
    let Some((_, first)) = hists.first() else {
        return Err(Error::Reporting("no histograms to write".into()));
    };
    if hists.iter().any(|(_, h)| h.bin_edges != first.bin_edges) {
        return Err(Error::Reporting("histograms use different bins".into()));
    }
    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["bin_low".to_string(), "bin_high".to_string()];
    header.extend(hists.iter().map(|(m, _)| m.as_str().to_string()));
    let enc = |e: csv::Error| Error::Reporting(format!("csv encoding failed: {e}"));
    writer.write_record(&header).map_err(enc)?;
    let densities: Vec<Vec<f64>> = hists.iter().map(|(_, h)| h.density()).collect();
    for b in 0..first.n_bins() {
        let mut row = vec![first.bin_edges[b].to_string(), first.bin_edges[b + 1].to_string()];
        for (k, (_, h)) in hists.iter().enumerate() {
            row.push(if density {
                densities[k][b].to_string()
            } else {
                h.counts[b].to_string()
            });
        }
        writer.write_record(&row).map_err(enc)?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| Error::Reporting(format!("csv encoding failed: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

const SVG_COLORS: [&str; 3] = ["#1f77b4", "#d62728", "#2ca02c"];

/// Grouped bar chart of same-binned histograms, one color per method.
pub fn histogram_svg(title: &str, hists: &[(Method, &Histogram)], density: bool) -> Result<String> {
    let Some((_, first)) = hists.first() else {
        return Err(Error::Reporting("no histograms to draw".into()));
    };
    if hists.iter().any(|(_, h)| h.bin_edges != first.bin_edges) {
        return Err(Error::Reporting("histograms use different bins".into()));
    }
    let values: Vec<Vec<f64>> = hists
        .iter()
        .map(|(_, h)| {
            if density {
                h.density()
            } else {
                h.counts.iter().map(|&c| c as f64).collect()
            }
        })
        .collect();
    let peak = values.iter().flatten().cloned().fold(0.0f64, f64::max);
    let peak = if peak > 0.0 { peak } else { 1.0 };

    let (w, h) = (720.0, 400.0);
    let (left, right, top, bottom) = (60.0, 20.0, 40.0, 50.0);
    let plot_w = w - left - right;
    let plot_h = h - top - bottom;
    let n_bins = first.n_bins();
    let group_w = plot_w / n_bins as f64;
    let bar_w = group_w / hists.len() as f64;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" font-family="sans-serif" font-size="15" text-anchor="middle">{}</text>"#,
        w / 2.0,
        xml_escape(title)
    );
    for (k, vals) in values.iter().enumerate() {
        for (b, &v) in vals.iter().enumerate() {
            let bh = v / peak * plot_h;
            let x = left + b as f64 * group_w + k as f64 * bar_w;
            let _ = writeln!(
                s,
                r#"<rect x="{x:.2}" y="{:.2}" width="{bar_w:.2}" height="{bh:.2}" fill="{}"/>"#,
                top + plot_h - bh,
                SVG_COLORS[k % SVG_COLORS.len()]
            );
        }
    }
    let axis_y = top + plot_h;
    let _ = writeln!(
        s,
        r#"<line x1="{left}" y1="{axis_y}" x2="{}" y2="{axis_y}" stroke="black"/>"#,
        left + plot_w
    );
    let _ = writeln!(s, r#"<line x1="{left}" y1="{top}" x2="{left}" y2="{axis_y}" stroke="black"/>"#);
    for t in 0..=4 {
        let frac = t as f64 / 4.0;
        let edge = first.bin_edges[0] + frac * (first.bin_edges[n_bins] - first.bin_edges[0]);
        let x = left + frac * plot_w;
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="middle">{edge:.3}</text>"#,
            axis_y + 16.0
        );
        let y = axis_y - frac * plot_h;
        let label = if density {
            format!("{:.3}", frac * peak)
        } else {
            format!("{:.0}", frac * peak)
        };
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="end">{label}</text>"#,
            left - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12" text-anchor="middle">{}</text>"#,
        left + plot_w / 2.0,
        h - 12.0,
        xml_escape(&first.dim_label)
    );
    for (k, (m, _)) in hists.iter().enumerate() {
        let y = top + 6.0 + 16.0 * k as f64;
        let x = left + plot_w - 150.0;
        let _ = writeln!(
            s,
            r#"<rect x="{x:.2}" y="{y:.2}" width="10" height="10" fill="{}"/>"#,
            SVG_COLORS[k % SVG_COLORS.len()]
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11">{}</text>"#,
            x + 16.0,
            y + 9.0,
            m.title()
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::EnvSpec;

    fn record(b: usize, h: usize, m: Method, mean: f64, std: f64) -> MetricsRecord {
        MetricsRecord {
            environment: EnvName::BallInCup,
            method: m,
            budget: b,
            horizon: h,
            mean_error: mean,
            std_error: std,
            n_repetitions: 10,
            divergence_count: 0,
        }
    }

    fn full_grid() -> Vec<MetricsRecord> {
        let mut out = Vec::new();
        for (i, b) in [5, 10, 15, 20].into_iter().enumerate() {
            for (j, h) in [1, 20, 300].into_iter().enumerate() {
                for (k, m) in Method::ALL.into_iter().enumerate() {
                    let v = (i * 9 + j * 3 + k) as f64 / 7.0;
                    out.push(record(b, h, m, v, v / 3.0));
                }
            }
        }
        out
    }

    #[test]
    fn histogram_examples() {
        let h = histogram("x", &[0.1, 0.9, 0.6, 0.4], 2, (0.0, 1.0)).unwrap();
        assert_eq!(h.counts, vec![2, 2]);
        assert_eq!(h.bin_edges, vec![0.0, 0.5, 1.0]);

        let empty = histogram("x", &[], 4, (0.0, 1.0)).unwrap();
        assert_eq!(empty.counts, vec![0; 4]);
        assert_eq!(empty.density(), vec![0.0; 4]);

        let edges = histogram("x", &[0.0, 1.0, 0.5, -0.1, 1.1, f64::NAN], 2, (0.0, 1.0)).unwrap();
        assert_eq!(edges.counts, vec![1, 2]);
        assert_eq!(edges.overflow, 3);
        assert_eq!(edges.total(), 6);

        assert!(matches!(histogram("x", &[], 0, (0.0, 1.0)), Err(Error::Config(_))));
        assert!(matches!(histogram("x", &[], 3, (1.0, 1.0)), Err(Error::Config(_))));
    }

    #[test]
    fn density_integrates_to_one() {
        let samples: Vec<f64> = (0..97).map(|i| (i as f64 * 0.37).sin()).collect();
        let h = histogram("x", &samples, 7, (-1.0, 1.0)).unwrap();
        let area: f64 = h
            .density()
            .iter()
            .zip(h.bin_edges.windows(2))
            .map(|(d, e)| d * (e[1] - e[0]))
            .sum();
        assert!((area - 1.0).abs() < 1e-12);
    }

    #[test]
    fn boundary_mass_examples() {
        let spec = EnvSpec::new(EnvName::BallInCup);
        let corners = vec![vec![1.0, -1.0, 1.0], vec![-1.0, -1.0, -1.0]];
        assert_eq!(boundary_mass(&corners, &spec, 0.1).unwrap(), 1.0);
        let centers = vec![vec![0.0; 3]; 5];
        assert_eq!(boundary_mass(&centers, &spec, 0.1).unwrap(), 0.0);
        // One coordinate near an edge is enough.
        let mixed = vec![vec![0.0, 0.85, 0.0], vec![0.0, 0.7, 0.0]];
        assert_eq!(boundary_mass(&mixed, &spec, 0.1).unwrap(), 0.5);
        assert!(boundary_mass(&corners, &spec, 0.5).is_err());
        assert!(boundary_mass(&corners, &spec, 0.0).is_err());
        assert!(boundary_mass(&[vec![0.0]], &spec, 0.1).is_err());
    }

    #[test]
    fn aggregate_examples() {
        let a = aggregate(&[vec![4.14]]).unwrap();
        assert_eq!((a.mean, a.std), (4.14, 0.0));
        let a = aggregate(&[vec![1.0], vec![3.0]]).unwrap();
        assert_eq!((a.mean, a.std), (2.0, 1.0));
        // Trajectory means first: [1, 3] then [5].
        let a = aggregate(&[vec![1.0, 3.0], vec![5.0]]).unwrap();
        assert_eq!((a.mean, a.std), (3.5, 1.5));
        assert!(aggregate::<Vec<f64>>(&[]).is_err());
        assert!(aggregate(&[Vec::<f64>::new()]).is_err());
    }

    #[test]
    fn full_grid_renders_twelve_rows() {
        let t = render_table(&full_grid()).unwrap();
        let body: Vec<&str> = t.text.lines().skip(4).collect();
        assert_eq!(body.len(), 12);
        assert!(t.text.contains("| Random policies "));
        assert!(t.text.contains("RARPH"));
        for line in &body {
            assert_eq!(line.matches('±').count(), 3);
        }
        assert_eq!(t.csv.lines().count(), 37);
        assert!(t.csv.starts_with("env,budget,horizon,method,mean,std\n"));
        assert!(t.text.contains("0.143 ± 0.048"));
    }

    #[test]
    fn missing_cell_is_named() {
        let mut grid = full_grid();
        grid.retain(|r| !(r.budget == 10 && r.horizon == 20 && r.method == Method::Rarph));
        let err = render_table(&grid).unwrap_err().to_string();
        assert!(err.contains("(budget 10, horizon 20, method rarph)"), "{err}");
    }

    #[test]
    fn table_csv_round_trip() {
        let records = full_grid();
        let t = render_table(&records).unwrap();
        let parsed: Vec<TableRow> = parse_csv(&t.csv, "table.csv").unwrap();
        let expected: Vec<TableRow> = records.iter().map(TableRow::from).collect();
        assert_eq!(parsed, expected);
    }

    #[test]
    fn records_from_error_rows() {
        let mut rows = Vec::new();
        for rep in 0..2 {
            for t in 0..3 {
                rows.push(ErrorRow {
                    env: EnvName::RedundantArm,
                    method: Method::RandomActions,
                    budget: 5,
                    horizon: 20,
                    repetition: rep,
                    trajectory_id: t,
                    error: (rep * 3 + t) as f64,
                    diverged: rep == 1 && t == 2,
                    outcome_error: 1.0,
                });
            }
        }
        let recs = records_from_errors(&rows, ErrorKind::FullState).unwrap();
        assert_eq!(recs.len(), 1);
        // Repetition means 1 and 4.
        assert_eq!(recs[0].mean_error, 2.5);
        assert_eq!(recs[0].std_error, 1.5);
        assert_eq!(recs[0].n_repetitions, 2);
        assert_eq!(recs[0].divergence_count, 1);
        let outcome = records_from_errors(&rows, ErrorKind::Outcome).unwrap();
        assert_eq!((outcome[0].mean_error, outcome[0].std_error), (1.0, 0.0));

        let text = write_csv(&rows).unwrap();
        assert!(text.starts_with(
            "env,method,budget,horizon,repetition,trajectory_id,error,diverged,outcome_error\n"
        ));
        assert_eq!(parse_csv::<ErrorRow>(&text, "errors.csv").unwrap(), rows);
    }

    #[test]
    fn histogram_outputs() {
        let a = histogram("rel_x", &[0.1, 0.2, 0.9], 3, (0.0, 1.0)).unwrap();
        let b = histogram("rel_x", &[0.5], 3, (0.0, 1.0)).unwrap();
        let hists = [(Method::RandomPolicy, &a), (Method::RandomActions, &b)];
        let csv = histogram_csv(&hists, false).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "bin_low,bin_high,random_policy,random_actions");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].ends_with(",2,0"));
        let svg = histogram_svg("rel_x", &hists, true).unwrap();
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<rect").count(), 1 + 2 * 3 + 2);

        let c = histogram("rel_x", &[0.5], 4, (0.0, 1.0)).unwrap();
        assert!(histogram_csv(&[(Method::RandomPolicy, &a), (Method::Rarph, &c)], false).is_err());
    }
}
