use std::io::BufRead;

use crate::error::{Error, Result};

/// One point of an externally supplied FER curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferencePoint {
    pub ebn0_db: f64,
    pub fer: f64,
}

/// Reads `ebn0_db,fer` rows. A non-numeric first line is taken as a header;
/// blank lines and `#` comments are skipped.
pub fn read_reference_curve<R: BufRead>(input: R) -> Result<Vec<ReferencePoint>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed = match fields[..] {
            [a, b] => a.parse::<f64>().ok().zip(b.parse::<f64>().ok()),
            _ => None,
        };
        match parsed {
            Some((ebn0_db, fer)) => out.push(ReferencePoint { ebn0_db, fer }),
            None if i == 0 && out.is_empty() => continue,
            None => {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: format!("expected ebn0_db,fer, got {line:?}"),
                })
            }
        }
    }
    Ok(out)
}

/// A gnuplot script drawing FER against Eb/N0 on a log axis for each
/// `(title, csv path)` series. Simulation CSVs use columns 1 and 6,
/// reference curves columns 1 and 2.
pub fn gnuplot_script(simulated: &[(String, String)], references: &[(String, String)]) -> String {
    let mut s = String::from(
        "set datafile separator ','\nset logscale y\nset xlabel 'Eb/N0 (dB)'\nset ylabel 'FER'\nset grid\nset key bottom left\n",
    );
    let series: Vec<String> = simulated
        .iter()
        .map(|(t, p)| format!("'{p}' using 1:6 skip 1 with linespoints title '{t}'"))
        .chain(
            references
                .iter()
                .map(|(t, p)| format!("'{p}' using 1:2 skip 1 with lines dashtype 2 title '{t}'")),
        )
        .collect();
    if !series.is_empty() {
        s.push_str("plot ");
        s.push_str(&series.join(", \\\n     "));
        s.push('\n');
    }
    s
}
