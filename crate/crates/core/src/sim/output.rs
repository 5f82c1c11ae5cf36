//! Run artifacts: trajectory CSV, summary JSON and SVG plot.
//!
//! CSV columns: `t, x0..x{n-1}, u0..u{m-1}, min_boundary_h, filter_active,
//! solve_ms, status`. Floats use 17 significant digits, `filter_active` is
//! 0 or 1, and `status` is one of `ok`, `infeasible`, `not_converged`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::config::Scenario;
use super::run::{RunSummary, StepRecord, Trajectory};
use super::svg;
use crate::error::{Error, Result};
use crate::safety_filters::FilterStatus;

pub fn csv_header(n: usize, m: usize) -> String {
    let mut cols = vec!["t".to_string()];
    cols.extend((0..n).map(|i| format!("x{i}")));
    cols.extend((0..m).map(|i| format!("u{i}")));
    cols.extend(["min_boundary_h", "filter_active", "solve_ms", "status"].map(String::from));
    cols.join(",")
}

pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut out = csv_header(traj.state_dimension, traj.input_dimension);
    out.push('\n');
    for s in &traj.steps {
        let _ = write!(out, "{:.16e}", s.t);
        for v in s.x.iter().chain(&s.u) {
            let _ = write!(out, ",{v:.16e}");
        }
        let _ = writeln!(
            out,
            ",{:.16e},{},{:.16e},{}",
            s.min_boundary_h,
            u8::from(s.filter_active),
            s.solve_ms,
            s.status.as_str()
        );
    }
    out
}

fn parse_status(s: &str) -> Option<FilterStatus> {
    match s {
        "ok" => Some(FilterStatus::Optimal),
        "infeasible" => Some(FilterStatus::Infeasible),
        "not_converged" => Some(FilterStatus::NotConverged),
        _ => None,
    }
}

/// Reads a trajectory CSV back. The terminal state is not part of the file;
/// the last row's state stands in for it.
pub fn parse_trajectory_csv(text: &str) -> Result<Trajectory> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().ok_or_else(|| Error::Parse("empty CSV".into()))?.split(',').collect();
    let n = header.iter().filter(|c| c.starts_with('x')).count();
    let m = header.iter().filter(|c| c.starts_with('u')).count();
    if header.len() != n + m + 5 || header[0] != "t" || header != csv_header(n, m).split(',').collect::<Vec<_>>() {
        return Err(Error::Parse("unrecognized trajectory CSV header".into()));
    }
    let mut steps = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        let bad = || Error::Parse(format!("malformed CSV row {}", lineno + 2));
        if f.len() != header.len() {
            return Err(bad());
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
        let nums = f[..1 + n + m].iter().map(|s| num(s)).collect::<Result<Vec<_>>>()?;
        steps.push(StepRecord {
            t: nums[0],
            x: nums[1..1 + n].to_vec(),
            u: nums[1 + n..].to_vec(),
            min_boundary_h: num(f[1 + n + m])?,
            filter_active: f[2 + n + m] == "1",
            solve_ms: num(f[3 + n + m])?,
            status: parse_status(f[4 + n + m]).ok_or_else(bad)?,
        });
    }
    let (terminal_state, terminal_time) = steps.last().map(|s| (s.x.clone(), s.t)).unwrap_or_default();
    Ok(Trajectory {
        state_dimension: n,
        input_dimension: m,
        steps,
        terminal_state,
        terminal_time,
    })
}

pub fn summary_json(summary: &RunSummary) -> String {
    serde_json::to_string_pretty(summary).expect("summary serializes")
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes the artifacts enabled in the scenario's output options into
/// `dir`, named after the scenario. Returns the paths written.
pub fn emit_outputs(sc: &Scenario, traj: &Trajectory, summary: &RunSummary, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let opts = &sc.config.output;
    let name = &sc.config.name;
    let mut written = Vec::new();
    if opts.csv {
        let p = dir.join(format!("{name}.csv"));
        write(&p, &trajectory_csv(traj))?;
        written.push(p);
    }
    if opts.summary {
        let p = dir.join(format!("{name}.summary.json"));
        write(&p, &summary_json(summary))?;
        written.push(p);
    }
    if opts.svg {
        let p = dir.join(format!("{name}.svg"));
        write(&p, &svg::render(Some(sc), traj, opts.extent_stride)?)?;
        written.push(p);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(t: f64) -> StepRecord {
        StepRecord {
            t,
            x: vec![t, 0.1],
            u: vec![1.0, -0.25],
            min_boundary_h: 0.3,
            filter_active: t > 0.0,
            solve_ms: 0.0,
            status: FilterStatus::Optimal,
        }
    }

    #[test]
    fn empty_is_header_only() {
        let traj = Trajectory {
            state_dimension: 3,
            input_dimension: 2,
            ..Trajectory::default()
        };
        let text = trajectory_csv(&traj);
        assert_eq!(text, "t,x0,x1,x2,u0,u1,min_boundary_h,filter_active,solve_ms,status\n");
        assert!(parse_trajectory_csv(&text).unwrap().steps.is_empty());
    }

    #[test]
    fn round_trip_is_exact() {
        let traj = Trajectory {
            state_dimension: 2,
            input_dimension: 2,
            steps: vec![rec(0.0), rec(0.1), rec(0.2)],
            terminal_state: vec![0.2, 0.1],
            terminal_time: 0.2,
        };
        let text = trajectory_csv(&traj);
        assert_eq!(text.lines().count(), 4);
        let back = parse_trajectory_csv(&text).unwrap();
        assert_eq!(back.steps, traj.steps);
        assert!(parse_trajectory_csv("a,b\n").is_err());
    }

    #[test]
    fn write_failure_names_path() {
        let err = write(Path::new("/nonexistent-dir/x.csv"), "").unwrap_err();
        assert!(err.to_string().contains("/nonexistent-dir/x.csv"));
    }
}
