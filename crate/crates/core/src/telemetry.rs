//! CSV export of recorded samples.
//!
//! Columns: `t, s_norm, rot_err, x_err_x, x_err_y, x_err_z, V`, then
//! `o_err_norm_i, r_err_norm_i` for each agent `i`. Values carry 17
//! significant digits so a file round-trips every `f64` exactly.

use std::io::{self, Write};

use crate::sim::SimRecord;

pub fn csv_header(n_agents: usize) -> String {
    let mut cols: Vec<String> = ["t", "s_norm", "rot_err", "x_err_x", "x_err_y", "x_err_z", "V"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for i in 0..n_agents {
        cols.push(format!("o_err_norm_{i}"));
        cols.push(format!("r_err_norm_{i}"));
    }
    cols.join(",")
}

pub fn write_csv<W: Write>(rec: &SimRecord, mut out: W) -> io::Result<()> {
    let n = rec.samples.first().map_or(0, |s| s.o_err.len());
    writeln!(out, "{}", csv_header(n))?;
    let mut line = String::new();
    for s in &rec.samples {
        line.clear();
        let fixed = [s.t, s.s_norm, s.rot_err, s.x_err.x, s.x_err.y, s.x_err.z, s.v];
        let per_agent = s.o_err.iter().zip(&s.r_err).flat_map(|(o, r)| [*o, *r]);
        for (k, v) in fixed.into_iter().chain(per_agent).enumerate() {
            if k > 0 {
                line.push(',');
            }
            line.push_str(&format!("{v:.16e}"));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn csv_string(rec: &SimRecord) -> String {
    let mut buf = Vec::new();
    write_csv(rec, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("CSV is ASCII")
}
