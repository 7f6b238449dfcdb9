//! CSV and PGM writers, plus the reader `fit` uses to get a run back.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use super::metrics::MetricsSeries;
use super::HarnessError;
use crate::engine::SimulationTrace;
use crate::mapping::{CellIndex, OccupancyGrid};

/// First line of every CSV this crate writes.
pub const CSV_HEADER: &str = "# swarm-gridmapper csv v1";

const CAPACITY_TAG: &str = "# capacity ";

/// Per-run table: one row per tick. `capacity`, when known, is recorded in
/// a comment line so that `fit` can default its asymptote.
pub fn run_csv(series: &MetricsSeries, capacity: Option<u64>) -> String {
    let mut out = String::new();
    writeln!(out, "{CSV_HEADER}").unwrap();
    if let Some(c) = capacity {
        writeln!(out, "{CAPACITY_TAG}{c}").unwrap();
    }
    out.push_str("tick,t_s,global_Ce");
    for id in &series.agent_ids {
        write!(out, ",Ce_a{id}").unwrap();
    }
    out.push_str(",alive_count\n");
    for i in 0..series.len() {
        write!(out, "{},{:.3},{}", i + 1, series.times[i], series.global_ce[i]).unwrap();
        for v in &series.per_agent_ce[i] {
            write!(out, ",{v}").unwrap();
        }
        writeln!(out, ",{}", series.alive_count[i]).unwrap();
    }
    out
}

fn csv_error(line: usize, message: impl Into<String>) -> HarnessError {
    HarnessError::Csv {
        line,
        message: message.into(),
    }
}

/// Reads a table written by [`run_csv`]. Returns the series and the
/// recorded capacity, if any.
pub fn parse_run_csv(text: &str) -> Result<(MetricsSeries, Option<u64>), HarnessError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, l)) if l.trim() == CSV_HEADER => {}
        _ => return Err(csv_error(1, format!("expected `{CSV_HEADER}`"))),
    }
    let mut capacity = None;
    let mut columns: Option<Vec<String>> = None;
    let mut s = MetricsSeries::default();
    for (n, line) in lines {
        if let Some(c) = line.strip_prefix(CAPACITY_TAG) {
            capacity = Some(c.trim().parse().map_err(|_| csv_error(n, "bad capacity"))?);
            continue;
        }
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let Some(cols) = &columns else {
            if fields.len() < 4 || fields[..3] != ["tick", "t_s", "global_Ce"] || fields.last() != Some(&"alive_count") {
                return Err(csv_error(n, "unexpected column header"));
            }
            s.agent_ids = fields[3..fields.len() - 1]
                .iter()
                .map(|f| {
                    f.strip_prefix("Ce_a")
                        .and_then(|id| id.parse().ok())
                        .ok_or_else(|| csv_error(n, format!("bad agent column `{f}`")))
                })
                .collect::<Result<_, _>>()?;
            columns = Some(fields.iter().map(|f| f.to_string()).collect());
            continue;
        };
        if fields.len() != cols.len() {
            return Err(csv_error(n, format!("expected {} fields, found {}", cols.len(), fields.len())));
        }
        let num = |k: usize| -> Result<u64, HarnessError> {
            fields[k]
                .parse()
                .map_err(|_| csv_error(n, format!("bad integer `{}`", fields[k])))
        };
        s.times.push(
            fields[1]
                .parse()
                .map_err(|_| csv_error(n, format!("bad time `{}`", fields[1])))?,
        );
        s.global_ce.push(num(2)?);
        s.per_agent_ce
            .push((3..fields.len() - 1).map(num).collect::<Result<_, _>>()?);
        s.alive_count.push(num(fields.len() - 1)? as usize);
    }
    if columns.is_none() {
        return Err(csv_error(text.lines().count(), "missing column header"));
    }
    Ok((s, capacity))
}

/// Binary greyscale image of a grid, one pixel per cell, white = free.
/// The first image row is the top of the map (largest y).
pub fn pgm(grid: &OccupancyGrid) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", grid.cols(), grid.rows()).into_bytes();
    for row in (0..grid.rows()).rev() {
        for col in 0..grid.cols() {
            let p = grid.probability(CellIndex::new(row, col)).expect("cell in range");
            out.push((255.0 * (1.0 - p)).round() as u8);
        }
    }
    out
}

/// `tick,node_i,node_j,connected` for every unordered node pair of every
/// tick.
pub fn connectivity_csv(trace: &SimulationTrace) -> String {
    let mut out = format!("{CSV_HEADER}\ntick,node_i,node_j,connected\n");
    for t in &trace.ticks {
        let snap = &t.connectivity;
        let nodes = snap.nodes();
        for i in 0..nodes.len() {
            for j in i + 1..nodes.len() {
                writeln!(out, "{},{},{},{}", t.tick, nodes[i], nodes[j], u8::from(snap.at(i, j))).unwrap();
            }
        }
    }
    out
}

/// Writes through a temporary sibling and renames it into place, so readers
/// never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> MetricsSeries {
        MetricsSeries {
            times: vec![0.2, 0.4, 0.6000000000000001],
            global_ce: vec![10, 25, 40],
            agent_ids: vec![0, 3],
            per_agent_ce: vec![vec![10, 0], vec![20, 9], vec![30, 20]],
            alive_count: vec![1, 2, 2],
        }
    }

    #[test]
    fn csv_layout_is_stable() {
        let text = run_csv(&sample(), Some(500));
        assert_eq!(
            text,
            "# swarm-gridmapper csv v1\n# capacity 500\ntick,t_s,global_Ce,Ce_a0,Ce_a3,alive_count\n\
             1,0.200,10,10,0,1\n2,0.400,25,20,9,2\n3,0.600,40,30,20,2\n"
        );
    }

    #[test]
    fn csv_round_trips() {
        let (s, cap) = parse_run_csv(&run_csv(&sample(), Some(500))).unwrap();
        assert_eq!(cap, Some(500));
        assert_eq!(s.global_ce, sample().global_ce);
        assert_eq!(s.per_agent_ce, sample().per_agent_ce);
        assert_eq!(s.times, vec![0.2, 0.4, 0.6]);
        let (_, cap) = parse_run_csv(&run_csv(&sample(), None)).unwrap();
        assert_eq!(cap, None);
    }

    #[test]
    fn malformed_csv_names_the_line() {
        let text = run_csv(&sample(), None).replace("2,0.400,25", "2,0.400,x");
        match parse_run_csv(&text) {
            Err(HarnessError::Csv { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
        assert!(parse_run_csv("tick,t_s\n").is_err());
    }

    #[test]
    fn pgm_puts_the_top_row_first() {
        let mut g = OccupancyGrid::with_dims(0, 2, 3, 1.0);
        g.set_log_odds(CellIndex::new(1, 0), 10.0).unwrap();
        g.set_log_odds(CellIndex::new(0, 2), -10.0).unwrap();
        let bytes = pgm(&g);
        let header = b"P5\n3 2\n255\n";
        assert_eq!(&bytes[..header.len()], header);
        // top row: occupied, unknown, unknown; bottom row: unknown, unknown, free
        assert_eq!(&bytes[header.len()..], &[0, 128, 128, 128, 128, 255]);
    }

    #[test]
    fn atomic_write_leaves_no_temporary() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        write_atomic(&path, b"abc").unwrap();
        assert_eq!(fs::read(&path).unwrap(), b"abc");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
