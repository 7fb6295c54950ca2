//! Flat CSV writers. Floats carry 17 significant digits so that every value
//! round-trips.

use anyhow::{bail, Context, Result};
use rvmlab_core::stability::StabilityReport;
use rvmlab_core::trajectories::Trajectory;
use rvmlab_core::{EquilibriumBranch, FieldPair, MeridianGrid};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// `v` with 17 significant digits.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// File name of the fields dump at `k`.
pub fn fields_file_name(k: f64) -> String {
    format!("fields_K{k}.csv")
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn branch_csv(branch: &EquilibriumBranch) -> String {
    let mut s = String::from("K,residual,phi_inf,a_inf,min_phi,jac_cond,stop_reason\n");
    let last = branch.entries.len().saturating_sub(1);
    for (i, e) in branch.entries.iter().enumerate() {
        let stop = if i == last { branch.stop_reason.as_str() } else { "" };
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            num(e.k),
            num(e.residual),
            num(e.phi_inf),
            num(e.a_inf),
            num(e.min_phi),
            num(e.jac_cond),
            stop
        );
    }
    s
}

pub fn fields_csv(grid: &MeridianGrid, fields: &FieldPair) -> String {
    let mut s = String::from("r,z,phi,a_phi\n");
    for k in 0..grid.len() {
        let (r, z) = grid.coords(k);
        let _ = writeln!(s, "{},{},{},{}", num(r), num(z), num(fields.phi[k]), num(fields.a_phi[k]));
    }
    s
}

/// Writes `branch.csv` and one fields file per entry; returns the paths.
pub fn write_branch(dir: &Path, grid: &MeridianGrid, branch: &EquilibriumBranch) -> Result<Vec<PathBuf>> {
    let mut out = vec![dir.join("branch.csv")];
    write(&out[0], &branch_csv(branch))?;
    for e in &branch.entries {
        let p = dir.join(fields_file_name(e.k));
        write(&p, &fields_csv(grid, &e.fields))?;
        out.push(p);
    }
    Ok(out)
}

/// Reads a fields file written by [`fields_csv`] on the same grid.
pub fn read_fields(path: &Path, grid: &MeridianGrid) -> Result<FieldPair> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    if lines.next() != Some("r,z,phi,a_phi") {
        bail!("{}: expected header `r,z,phi,a_phi`", path.display());
    }
    let mut f = FieldPair::zeros(grid);
    let mut n = 0;
    for (row, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        if n >= grid.len() {
            bail!("{}: more rows than grid nodes ({})", path.display(), grid.len());
        }
        let cols: Vec<f64> = line
            .split(',')
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .with_context(|| format!("{}: line {}", path.display(), row + 2))?;
        if cols.len() != 4 {
            bail!("{}: line {} has {} columns", path.display(), row + 2, cols.len());
        }
        let (r, z) = grid.coords(n);
        let tol = 1e-9 * (1.0 + r.abs() + z.abs());
        if (cols[0] - r).abs() > tol || (cols[1] - z).abs() > tol {
            bail!("{}: line {} does not match the configured grid", path.display(), row + 2);
        }
        f.phi[n] = cols[2];
        f.a_phi[n] = cols[3];
        n += 1;
    }
    if n != grid.len() {
        bail!("{}: {} rows for {} grid nodes", path.display(), n, grid.len());
    }
    Ok(f)
}

pub fn stability_csv(reports: &[StabilityReport]) -> String {
    let mut s = String::from("K,q_lower_min,q_upper_min,margin,verdict\n");
    for r in reports {
        let margin = r.margin.map_or_else(String::new, num);
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            num(r.k),
            num(r.q_lower_min()),
            num(r.q_upper_min()),
            margin,
            r.verdict.as_str()
        );
    }
    s
}

pub fn write_stability(dir: &Path, reports: &[StabilityReport]) -> Result<PathBuf> {
    let p = dir.join("stability.csv");
    write(&p, &stability_csv(reports))?;
    Ok(p)
}

/// Every `stride`-th record plus the last one.
pub fn trajectory_csv(tr: &Trajectory, stride: usize) -> String {
    let mut s = String::from("t,r,phi,z,v_r,v_phi,v_z,e,p\n");
    let last = tr.records.len() - 1;
    for (i, rec) in tr.records.iter().enumerate() {
        if i % stride != 0 && i != last {
            continue;
        }
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            num(rec.t),
            num(rec.pos[0]),
            num(rec.pos[1]),
            num(rec.pos[2]),
            num(rec.mom[0]),
            num(rec.mom[1]),
            num(rec.mom[2]),
            num(rec.e),
            num(rec.p)
        );
    }
    s
}

pub fn write_trajectories(dir: &Path, trajectories: &[Trajectory], stride: usize) -> Result<Vec<PathBuf>> {
    let sub = dir.join("trajectories");
    std::fs::create_dir_all(&sub).with_context(|| format!("creating {}", sub.display()))?;
    let mut paths = Vec::new();
    let mut summary = String::from("particle,reflections,e_drift,p_drift\n");
    for (i, tr) in trajectories.iter().enumerate() {
        let p = sub.join(format!("particle_{i:04}.csv"));
        write(&p, &trajectory_csv(tr, stride))?;
        paths.push(p);
        let _ = writeln!(
            summary,
            "{i},{},{},{}",
            tr.reflections,
            num(tr.max_energy_drift()),
            num(tr.max_momentum_drift())
        );
    }
    let p = dir.join("trajectory_summary.csv");
    write(&p, &summary)?;
    paths.push(p);
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rvmlab_core::MeridianDomain;

    #[test]
    fn numbers_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02e23, f64::MIN_POSITIVE] {
            let s = num(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
            let digits = s.split('e').next().unwrap().chars().filter(char::is_ascii_digit).count();
            assert_eq!(digits, 17);
        }
    }

    #[test]
    fn fields_round_trip() {
        let g = MeridianGrid::new(MeridianDomain::new(1.0, 2.0, 0.0, 1.0).unwrap(), 5, 4).unwrap();
        let mut f = FieldPair::zeros(&g);
        f.phi = g.sample(|r, z| r.sin() * z);
        f.a_phi = g.sample(|r, z| (r * z).exp() / 3.0);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.csv");
        std::fs::write(&p, fields_csv(&g, &f)).unwrap();
        assert_eq!(read_fields(&p, &g).unwrap(), f);
        let g2 = MeridianGrid::new(MeridianDomain::new(1.0, 2.0, 0.0, 1.0).unwrap(), 4, 5).unwrap();
        assert!(read_fields(&p, &g2).is_err());
    }

    #[test]
    fn fields_file_names() {
        assert_eq!(fields_file_name(0.1), "fields_K0.1.csv");
        assert_eq!(fields_file_name(2.0), "fields_K2.csv");
    }
}
