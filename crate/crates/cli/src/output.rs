use std::fs::File;
use std::io::{self, BufWriter, Write};

use crate::config::ExperimentConfig;

pub fn open(path: Option<&str>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// `#`-prefixed block naming the command and every resolved setting, plus
/// any extra lines (results that do not fit the table).
pub fn write_header<W: Write + ?Sized>(
    out: &mut W,
    config: &ExperimentConfig,
    extra: &[(&str, String)],
) -> io::Result<()> {
    writeln!(
        out,
        "# taylor-gmrf {} {}",
        env!("CARGO_PKG_VERSION"),
        config.command.name()
    )?;
    for (k, v) in &config.resolved {
        writeln!(out, "# {k} = {v}")?;
    }
    for (k, v) in extra {
        writeln!(out, "# {k} = {v}")?;
    }
    Ok(())
}

/// Shortest representation that round-trips.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}
