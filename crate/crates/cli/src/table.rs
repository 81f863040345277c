//! CSV input and output.

use std::io::Write;
use std::path::Path;

use multikernel::error_analysis::format_float;

use crate::failure::{CliError, CliResult};

/// Rows of a `x1,...,xd[,y]` file.
#[derive(Debug, Clone, PartialEq)]
pub struct PointTable {
    pub points: Vec<Vec<f64>>,
    pub values: Option<Vec<f64>>,
    /// 1-based file line of each row.
    pub lines: Vec<u64>,
}

impl PointTable {
    pub fn dim(&self) -> Option<usize> {
        self.points.first().map(Vec::len)
    }

    /// Requires the `y` column.
    pub fn require_values(&self, path: &Path) -> CliResult<&[f64]> {
        self.values
            .as_deref()
            .ok_or_else(|| CliError::input(format!("{}: missing `y` column", path.display())))
    }
}

/// Reads `x1,...,xd` with an optional trailing `y` column. The header must
/// name the columns exactly; every field must be a finite number.
pub fn read_points(path: &Path) -> CliResult<PointTable> {
    let file = std::fs::File::open(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    read_points_from(file).map_err(|e| e.context(&path.display().to_string()))
}

pub fn read_points_from<R: std::io::Read>(reader: R) -> CliResult<PointTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| CliError::input(format!("header: {e}")))?
        .clone();
    let names: Vec<&str> = header.iter().collect();
    let has_y = names.last() == Some(&"y");
    let d = names.len() - usize::from(has_y);
    if d == 0 {
        return Err(CliError::input(
            "line 1: header needs at least one coordinate column x1",
        ));
    }
    for (j, name) in names[..d].iter().enumerate() {
        if *name != format!("x{}", j + 1) {
            return Err(CliError::input(format!(
                "line 1: expected column `x{}`, found `{name}`",
                j + 1
            )));
        }
    }
    let mut table = PointTable {
        points: Vec::new(),
        values: has_y.then(Vec::new),
        lines: Vec::new(),
    };
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            CliError::input(format!("line {line}: {e}"))
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let mut fields = Vec::with_capacity(names.len());
        for (j, field) in record.iter().enumerate() {
            if field.is_empty() {
                return Err(CliError::input(format!(
                    "line {line}: empty value in column `{}`",
                    names[j]
                )));
            }
            let v: f64 = field.parse().map_err(|_| {
                CliError::input(format!(
                    "line {line}: `{field}` in column `{}` is not a number",
                    names[j]
                ))
            })?;
            if !v.is_finite() {
                return Err(CliError::input(format!(
                    "line {line}: non-finite value in column `{}`",
                    names[j]
                )));
            }
            fields.push(v);
        }
        if let Some(values) = table.values.as_mut() {
            values.push(fields.pop().expect("record has the header's width"));
        }
        table.points.push(fields);
        table.lines.push(line);
    }
    Ok(table)
}

/// Row-oriented CSV writer using shortest round-trip float notation.
pub struct CsvOut {
    out: Box<dyn Write>,
}

impl CsvOut {
    pub fn create(path: Option<&Path>) -> CliResult<Self> {
        let out: Box<dyn Write> = match path {
            Some(p) => Box::new(std::io::BufWriter::new(
                std::fs::File::create(p).map_err(|e| CliError::input(format!("{}: {e}", p.display())))?,
            )),
            None => Box::new(std::io::BufWriter::new(std::io::stdout())),
        };
        Ok(Self { out })
    }

    pub fn header(&mut self, columns: &[String]) -> CliResult<()> {
        writeln!(self.out, "{}", columns.join(","))?;
        Ok(())
    }

    pub fn row(&mut self, numbers: &[f64], extra: &[&str]) -> CliResult<()> {
        let mut fields: Vec<String> = numbers.iter().map(|x| format_float(*x)).collect();
        fields.extend(extra.iter().map(|s| s.to_string()));
        writeln!(self.out, "{}", fields.join(","))?;
        Ok(())
    }

    pub fn raw(&mut self) -> &mut dyn Write {
        &mut self.out
    }

    pub fn finish(mut self) -> CliResult<()> {
        self.out.flush()?;
        Ok(())
    }
}

pub fn coordinate_columns(d: usize) -> Vec<String> {
    (1..=d).map(|j| format!("x{j}")).collect()
}
