//! Deterministic CSV and gnuplot output.
//!
//! All floats are written as `{:.16e}` (17 significant digits), which round
//! trips every f64 exactly, so identical runs produce byte-identical files.

use std::io::{self, Write};
use std::path::Path;

use crate::dynamics::Trajectory;
use crate::spectral::HopfThresholds;

fn push_value(out: &mut String, value: f64) {
    use std::fmt::Write as _;
    write!(out, "{value:.16e}").expect("string writes cannot fail");
}

/// Render a trajectory as CSV with header `t,x1,..,xn,u1,..,un`.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let n = traj.n();
    let mut out = String::with_capacity(traj.len() * (2 * n + 1) * 26);
    out.push('t');
    for i in 1..=n {
        use std::fmt::Write as _;
        write!(out, ",x{i}").unwrap();
    }
    for i in 1..=n {
        use std::fmt::Write as _;
        write!(out, ",u{i}").unwrap();
    }
    out.push('\n');
    for m in 0..traj.len() {
        push_value(&mut out, traj.times[m]);
        for i in 0..n {
            out.push(',');
            push_value(&mut out, traj.x[i][m]);
        }
        for i in 0..n {
            out.push(',');
            push_value(&mut out, traj.u[i][m]);
        }
        out.push('\n');
    }
    out
}

pub fn write_trajectory_csv(path: impl AsRef<Path>, traj: &Trajectory) -> io::Result<()> {
    let mut file = std::fs::File::create(path)?;
    file.write_all(trajectory_csv(traj).as_bytes())
}

/// Gnuplot script plotting every population and control column of a
/// trajectory CSV produced by [`trajectory_csv`].
pub fn gnuplot_script(csv_name: &str, n: usize) -> String {
    use std::fmt::Write as _;
    let mut out = String::new();
    writeln!(out, "set datafile separator ','").unwrap();
    writeln!(out, "set key autotitle columnhead").unwrap();
    writeln!(out, "set xlabel 't'").unwrap();
    writeln!(out, "set grid").unwrap();
    out.push_str("plot ");
    for i in 0..2 * n {
        if i > 0 {
            out.push_str(", \\\n     ");
        }
        write!(out, "'{csv_name}' using 1:{} with lines", i + 2).unwrap();
    }
    out.push('\n');
    out
}

/// Threshold table as CSV `n,tau_n,omega,spacing`; the last two columns are
/// constant across rows.
pub fn thresholds_csv(thresholds: &HopfThresholds) -> String {
    let mut out = String::from("n,tau_n,omega,spacing\n");
    let spacing = thresholds.spacing();
    for (n, tau) in thresholds.taus.iter().enumerate() {
        use std::fmt::Write as _;
        write!(out, "{n},").unwrap();
        push_value(&mut out, *tau);
        out.push(',');
        push_value(&mut out, thresholds.omega);
        out.push(',');
        push_value(&mut out, spacing);
        out.push('\n');
    }
    out
}

pub fn write_text(path: impl AsRef<Path>, text: &str) -> io::Result<()> {
    let mut file = std::fs::File::create(path)?;
    file.write_all(text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::integrate;
    use crate::fixtures::scalar_memory_control;
    use crate::model::InitialData;
    use crate::spectral::hopf_thresholds;

    fn short_run() -> Trajectory {
        let spec = scalar_memory_control();
        let init = InitialData::constant(&[0.4], &[0.1]);
        integrate(&spec, &init, 0.01, 2.0).unwrap()
    }

    #[test]
    fn csv_shape_and_roundtrip() {
        let traj = short_run();
        let csv = trajectory_csv(&traj);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("t,x1,u1"));
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), traj.len());
        // Every written value reparses to the exact stored float.
        let fields: Vec<f64> = rows[rows.len() - 1]
            .split(',')
            .map(|f| f.parse().unwrap())
            .collect();
        let last = traj.len() - 1;
        assert_eq!(fields[0], traj.times[last]);
        assert_eq!(fields[1], traj.x[0][last]);
        assert_eq!(fields[2], traj.u[0][last]);
    }

    #[test]
    fn identical_runs_are_byte_identical() {
        let a = trajectory_csv(&short_run());
        let b = trajectory_csv(&short_run());
        assert_eq!(a, b);
    }

    #[test]
    fn gnuplot_script_covers_all_columns() {
        let script = gnuplot_script("run.csv", 2);
        assert!(script.contains("set datafile separator ','"));
        for col in 2..=5 {
            assert!(script.contains(&format!("using 1:{col}")));
        }
        assert!(!script.contains("using 1:6"));
    }

    #[test]
    fn threshold_table_has_constant_tail_columns() {
        let th = hopf_thresholds(1.0, 2.0, 2).unwrap();
        let csv = thresholds_csv(&th);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("n,tau_n,omega,spacing"));
        let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0][0], "0");
        assert_eq!(rows[2][0], "2");
        assert!(rows.iter().all(|r| r[2] == rows[0][2]));
        assert!(rows.iter().all(|r| r[3] == rows[0][3]));
        let tau0: f64 = rows[0][1].parse().unwrap();
        assert!((tau0 - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }
}
