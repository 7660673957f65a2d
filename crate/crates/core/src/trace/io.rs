//! Trace file formats.
//!
//! `canonical_tsv`: the first line is a JSON header
//! `{"tables":[{"id":..,"rows":..,"dim":..,"pool":..},...]}`; every following
//! line is one input, `input_id<TAB>t:i,i,...;t:i,...`, table groups in
//! ascending table id.
//!
//! `binary` (little-endian): magic `HTLT`, `u32` version 1, `u32` header
//! length, the same JSON header, then per input `u64` input id, `u32` access
//! count and that many `(u16 table_id, u64 row_index)` pairs.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{validate_tables, SparseAccess, TableSpec, TraceError, TrainingInput};

const MAGIC: &[u8; 4] = b"HTLT";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceFormat {
    #[serde(alias = "canonical_tsv")]
    Tsv,
    #[serde(alias = "binary")]
    Bin,
}

impl TraceFormat {
    pub fn extension(self) -> &'static str {
        match self {
            TraceFormat::Tsv => "tsv",
            TraceFormat::Bin => "bin",
        }
    }
}

impl FromStr for TraceFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tsv" | "canonical_tsv" => Ok(TraceFormat::Tsv),
            "bin" | "binary" => Ok(TraceFormat::Bin),
            other => Err(format!("unknown trace format `{other}`")),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    tables: Vec<TableSpec>,
}

/// Streaming trace writer.
pub struct TraceWriter<W: Write> {
    out: W,
    format: TraceFormat,
    line: String,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(mut out: W, format: TraceFormat, tables: &[TableSpec]) -> Result<Self, TraceError> {
        validate_tables(tables)?;
        let header = serde_json::to_string(&Header {
            tables: tables.to_vec(),
        })
        .map_err(io::Error::other)?;
        match format {
            TraceFormat::Tsv => {
                out.write_all(header.as_bytes())?;
                out.write_all(b"\n")?;
            }
            TraceFormat::Bin => {
                out.write_all(MAGIC)?;
                out.write_all(&VERSION.to_le_bytes())?;
                out.write_all(&(header.len() as u32).to_le_bytes())?;
                out.write_all(header.as_bytes())?;
            }
        }
        Ok(TraceWriter {
            out,
            format,
            line: String::new(),
        })
    }

    pub fn write_input(&mut self, input: &TrainingInput) -> Result<(), TraceError> {
        match self.format {
            TraceFormat::Tsv => {
                self.line.clear();
                write!(self.line, "{}\t", input.input_id).unwrap();
                let mut current: Option<u32> = None;
                for a in &input.accesses {
                    if current == Some(a.table_id) {
                        self.line.push(',');
                    } else {
                        if current.is_some() {
                            self.line.push(';');
                        }
                        write!(self.line, "{}:", a.table_id).unwrap();
                        current = Some(a.table_id);
                    }
                    write!(self.line, "{}", a.row_index).unwrap();
                }
                self.line.push('\n');
                self.out.write_all(self.line.as_bytes())?;
            }
            TraceFormat::Bin => {
                self.out.write_all(&input.input_id.to_le_bytes())?;
                self.out
                    .write_all(&(input.accesses.len() as u32).to_le_bytes())?;
                for a in &input.accesses {
                    let table = u16::try_from(a.table_id).map_err(|_| TraceError::Malformed {
                        record: input.input_id,
                        msg: format!("table id {} does not fit in u16", a.table_id),
                    })?;
                    self.out.write_all(&table.to_le_bytes())?;
                    self.out.write_all(&a.row_index.to_le_bytes())?;
                }
            }
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<W, TraceError> {
        self.out.flush()?;
        Ok(self.out)
    }
}

/// Writes a whole trace to `path`, returning the number of records.
pub fn write_trace<I>(
    path: &Path,
    format: TraceFormat,
    tables: &[TableSpec],
    inputs: I,
) -> Result<u64, TraceError>
where
    I: IntoIterator<Item = TrainingInput>,
{
    let file = BufWriter::new(File::create(path)?);
    let mut writer = TraceWriter::new(file, format, tables)?;
    let mut n = 0;
    for input in inputs {
        writer.write_input(&input)?;
        n += 1;
    }
    writer.finish()?;
    Ok(n)
}

/// Streaming reader; yields inputs in file order.
pub struct TraceReader<R> {
    src: R,
    format: TraceFormat,
    rows: HashMap<u32, u64>,
    /// 1-based record number of the last record read.
    record: u64,
    line: String,
    done: bool,
}

impl<R: BufRead> TraceReader<R> {
    pub fn new(mut src: R, format: TraceFormat) -> Result<(Vec<TableSpec>, Self), TraceError> {
        let header: Header = match format {
            TraceFormat::Tsv => {
                let mut line = String::new();
                src.read_line(&mut line)?;
                serde_json::from_str(line.trim_end()).map_err(|e| TraceError::Malformed {
                    record: 0,
                    msg: format!("bad header: {e}"),
                })?
            }
            TraceFormat::Bin => {
                let mut magic = [0u8; 4];
                src.read_exact(&mut magic)?;
                if &magic != MAGIC {
                    return Err(TraceError::Malformed {
                        record: 0,
                        msg: "bad magic".into(),
                    });
                }
                let version = read_u32(&mut src)?;
                if version != VERSION {
                    return Err(TraceError::Malformed {
                        record: 0,
                        msg: format!("unsupported version {version}"),
                    });
                }
                let len = read_u32(&mut src)? as usize;
                let mut buf = vec![0u8; len];
                src.read_exact(&mut buf)?;
                serde_json::from_slice(&buf).map_err(|e| TraceError::Malformed {
                    record: 0,
                    msg: format!("bad header: {e}"),
                })?
            }
        };
        validate_tables(&header.tables)?;
        let rows = header
            .tables
            .iter()
            .map(|t| (t.table_id, t.num_rows))
            .collect();
        Ok((
            header.tables,
            TraceReader {
                src,
                format,
                rows,
                record: 0,
                line: String::new(),
                done: false,
            },
        ))
    }

    fn check(&self, table: u32, row: u64, prev: Option<u32>) -> Result<SparseAccess, TraceError> {
        let rows = *self.rows.get(&table).ok_or(TraceError::UnknownTable {
            record: self.record,
            table,
        })?;
        if row >= rows {
            return Err(TraceError::RowOutOfRange {
                record: self.record,
                table,
                row,
                rows,
            });
        }
        if prev.is_some_and(|p| p > table) {
            return Err(self.malformed(format!("table {table} out of ascending order")));
        }
        Ok(SparseAccess::new(table, row))
    }

    fn malformed(&self, msg: String) -> TraceError {
        TraceError::Malformed {
            record: self.record,
            msg,
        }
    }

    fn next_tsv(&mut self) -> Result<Option<TrainingInput>, TraceError> {
        self.line.clear();
        if self.src.read_line(&mut self.line)? == 0 {
            return Ok(None);
        }
        self.record += 1;
        let line = std::mem::take(&mut self.line);
        let result = self.parse_tsv_line(line.trim_end_matches(['\n', '\r']));
        self.line = line;
        result.map(Some)
    }

    fn parse_tsv_line(&self, line: &str) -> Result<TrainingInput, TraceError> {
        let (id, body) = line
            .split_once('\t')
            .ok_or_else(|| self.malformed("missing tab separator".into()))?;
        let input_id = id
            .parse()
            .map_err(|_| self.malformed(format!("bad input id `{id}`")))?;
        let mut accesses = Vec::new();
        let mut prev = None;
        if !body.is_empty() {
            for group in body.split(';') {
                let (table, rows) = group
                    .split_once(':')
                    .ok_or_else(|| self.malformed(format!("bad table group `{group}`")))?;
                let table: u32 = table
                    .parse()
                    .map_err(|_| self.malformed(format!("bad table id `{table}`")))?;
                if prev == Some(table) {
                    return Err(self.malformed(format!("table {table} repeated")));
                }
                for row in rows.split(',') {
                    let row: u64 = row
                        .parse()
                        .map_err(|_| self.malformed(format!("bad row index `{row}`")))?;
                    accesses.push(self.check(table, row, prev)?);
                }
                prev = Some(table);
            }
        }
        Ok(TrainingInput { input_id, accesses })
    }

    fn next_bin(&mut self) -> Result<Option<TrainingInput>, TraceError> {
        let mut id = [0u8; 8];
        // A clean end of file is only allowed on a record boundary.
        if !read_exact_or_eof(&mut self.src, &mut id)? {
            return Ok(None);
        }
        self.record += 1;
        let truncated = |r: u64| TraceError::Malformed {
            record: r,
            msg: "truncated record".into(),
        };
        let record = self.record;
        let count = read_u32(&mut self.src).map_err(|_| truncated(record))?;
        let mut accesses = Vec::with_capacity(count as usize);
        let mut prev = None;
        let mut pair = [0u8; 10];
        for _ in 0..count {
            self.src
                .read_exact(&mut pair)
                .map_err(|_| truncated(record))?;
            let table = u16::from_le_bytes([pair[0], pair[1]]) as u32;
            let row = u64::from_le_bytes(pair[2..10].try_into().unwrap());
            accesses.push(self.check(table, row, prev)?);
            prev = Some(table);
        }
        Ok(Some(TrainingInput {
            input_id: u64::from_le_bytes(id),
            accesses,
        }))
    }
}

impl<R: BufRead> Iterator for TraceReader<R> {
    type Item = Result<TrainingInput, TraceError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let out = match self.format {
            TraceFormat::Tsv => self.next_tsv(),
            TraceFormat::Bin => self.next_bin(),
        };
        match out {
            Ok(Some(input)) => Some(Ok(input)),
            Ok(None) => {
                self.done = true;
                None
            }
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}

/// Opens a trace file for streaming.
pub fn load_trace(
    path: &Path,
    format: TraceFormat,
) -> Result<(Vec<TableSpec>, TraceReader<BufReader<File>>), TraceError> {
    let file = BufReader::new(File::open(path)?);
    TraceReader::new(file, format)
}

fn read_u32<R: Read>(src: &mut R) -> io::Result<u32> {
    let mut buf = [0u8; 4];
    src.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

/// Fills `buf`; returns `false` on EOF before the first byte.
fn read_exact_or_eof<R: Read>(src: &mut R, buf: &mut [u8]) -> Result<bool, TraceError> {
    let mut filled = 0;
    while filled < buf.len() {
        match src.read(&mut buf[filled..]) {
            Ok(0) if filled == 0 => return Ok(false),
            Ok(0) => {
                return Err(TraceError::Malformed {
                    record: 0,
                    msg: "truncated record id".into(),
                })
            }
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(true)
}
