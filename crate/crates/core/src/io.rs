//! Cascade and dataset file formats.
//!
//! Basic cascades are comma-separated with the header `time,magnitude`;
//! simulated cascades may append `generation,parent` (empty parent for
//! observed or seed events). Extended cascades use
//! `time,followers,friends,statuses,account_created,user_key` and derive the
//! magnitude from the follower count. Follower counts below one are clamped
//! to one and counted. Everything else that is malformed is rejected with
//! the 1-based line number.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::model::{Cascade, Event, UserMeta};
use crate::simulation::SimCascade;

pub const BASIC_HEADER: &str = "time,magnitude";
pub const LINEAGE_HEADER: &str = "time,magnitude,generation,parent";
pub const EXTENDED_HEADER: &str = "time,followers,friends,statuses,account_created,user_key";
pub const INDEX_HEADER: &str = "id,path,final_size,initiator,start_time,split";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Basic,
    Extended,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "basic" => Ok(Format::Basic),
            "extended" => Ok(Format::Extended),
            other => Err(Error::Config(format!("unknown format {other:?} (basic|extended)"))),
        }
    }
}

/// A parsed cascade plus the number of clamped magnitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct Parsed {
    pub cascade: Cascade,
    pub clamped: usize,
}

/// Non-empty lines with their 1-based numbers; a trailing `\r` is dropped.
fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)))
        .filter(|(_, l)| !l.trim().is_empty())
}

fn field_count(line: usize, cells: &[&str], expected: usize) -> Result<()> {
    if cells.len() != expected {
        return Err(Error::parse(
            line,
            format!("expected {expected} columns, found {}", cells.len()),
        ));
    }
    Ok(())
}

fn number(line: usize, name: &str, cell: &str) -> Result<f64> {
    let v: f64 = cell
        .trim()
        .parse()
        .map_err(|_| Error::parse(line, format!("{name}: {cell:?} is not a number")))?;
    if !v.is_finite() || v < 0.0 {
        return Err(Error::parse(line, format!("{name}: {cell:?} must be finite and non-negative")));
    }
    Ok(v)
}

fn count(line: usize, name: &str, cell: &str) -> Result<u64> {
    cell.trim()
        .parse()
        .map_err(|_| Error::parse(line, format!("{name}: {cell:?} is not a non-negative integer")))
}

fn check_time(line: usize, time: f64, previous: Option<f64>) -> Result<()> {
    match previous {
        None if time != 0.0 => Err(Error::parse(line, format!("first event must be at time 0, found {time}"))),
        Some(p) if time < p => Err(Error::parse(line, format!("time {time} precedes previous time {p}"))),
        _ => Ok(()),
    }
}

fn finish(id: &str, events: Vec<Event>, clamped: usize, header_line: usize) -> Result<Parsed> {
    if events.is_empty() {
        return Err(Error::parse(header_line, "no events after the header"));
    }
    Ok(Parsed {
        cascade: Cascade::until_last_event(id, events)?,
        clamped,
    })
}

/// Parses a basic cascade; lineage columns are accepted and ignored.
pub fn parse_basic_cascade(id: &str, text: &str) -> Result<Parsed> {
    parse_basic_with_lineage(id, text).map(|(parsed, _)| parsed)
}

/// Parses a basic cascade together with the `(generation, parent)` columns
/// when present.
pub fn parse_basic_with_lineage(id: &str, text: &str) -> Result<(Parsed, Option<Vec<(u32, Option<usize>)>>)> {
    let mut it = lines(text);
    let (header_line, header) = it.next().ok_or_else(|| Error::parse(1, "missing header"))?;
    let with_lineage = match header.trim() {
        BASIC_HEADER => false,
        LINEAGE_HEADER => true,
        other => {
            return Err(Error::parse(
                header_line,
                format!("expected header {BASIC_HEADER:?}, found {other:?}"),
            ))
        }
    };
    let width = if with_lineage { 4 } else { 2 };
    let mut events = Vec::new();
    let mut lineage = Vec::new();
    let mut clamped = 0;
    for (line, row) in it {
        let cells: Vec<&str> = row.split(',').collect();
        field_count(line, &cells, width)?;
        let time = number(line, "time", cells[0])?;
        check_time(line, time, events.last().map(|e: &Event| e.time))?;
        let (event, was_clamped) = Event::from_followers(time, number(line, "magnitude", cells[1])?);
        clamped += usize::from(was_clamped);
        if with_lineage {
            let generation = count(line, "generation", cells[2])? as u32;
            let parent = match cells[3].trim() {
                "" => None,
                p => {
                    let p = count(line, "parent", p)? as usize;
                    if p >= events.len() {
                        return Err(Error::parse(line, format!("parent {p} does not precede this event")));
                    }
                    Some(p)
                }
            };
            lineage.push((generation, parent));
        }
        events.push(event);
    }
    let parsed = finish(id, events, clamped, header_line)?;
    Ok((parsed, with_lineage.then_some(lineage)))
}

pub fn parse_extended_cascade(id: &str, text: &str) -> Result<Parsed> {
    let mut it = lines(text);
    let (header_line, header) = it.next().ok_or_else(|| Error::parse(1, "missing header"))?;
    if header.trim() != EXTENDED_HEADER {
        return Err(Error::parse(
            header_line,
            format!("expected header {EXTENDED_HEADER:?}, found {:?}", header.trim()),
        ));
    }
    let mut events = Vec::new();
    let mut clamped = 0;
    for (line, row) in it {
        let cells: Vec<&str> = row.split(',').collect();
        field_count(line, &cells, 6)?;
        let time = number(line, "time", cells[0])?;
        check_time(line, time, events.last().map(|e: &Event| e.time))?;
        let followers = count(line, "followers", cells[1])?;
        let user_key = cells[5].trim();
        if user_key.is_empty() {
            return Err(Error::parse(line, "empty user_key"));
        }
        let user = UserMeta {
            followers,
            friends: count(line, "friends", cells[2])?,
            statuses: count(line, "statuses", cells[3])?,
            account_created: number(line, "account_created", cells[4])?,
            user_key: user_key.to_string(),
        };
        let (event, was_clamped) = Event::from_followers(time, followers as f64);
        clamped += usize::from(was_clamped);
        events.push(event.with_user(user));
    }
    finish(id, events, clamped, header_line)
}

pub fn parse_cascade(id: &str, text: &str, format: Format) -> Result<Parsed> {
    match format {
        Format::Basic => parse_basic_cascade(id, text),
        Format::Extended => parse_extended_cascade(id, text),
    }
}

/// Reads a cascade file; the id is the file stem.
pub fn load_cascade(path: &Path, format: Format) -> Result<Parsed> {
    let text = std::fs::read_to_string(path)?;
    let id = path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
    parse_cascade(&id, &text, format)
}

pub fn write_basic_cascade(cascade: &Cascade) -> String {
    let mut out = format!("{BASIC_HEADER}\n");
    for e in cascade.events() {
        let _ = writeln!(out, "{},{}", e.time, e.magnitude);
    }
    out
}

/// Basic format with lineage columns.
pub fn write_simulated_cascade(sim: &SimCascade) -> String {
    let mut out = format!("{LINEAGE_HEADER}\n");
    for (i, e) in sim.cascade.events().iter().enumerate() {
        let parent = sim.parent[i].map_or(String::new(), |p| p.to_string());
        let _ = writeln!(out, "{},{},{},{}", e.time, e.magnitude, sim.generation[i], parent);
    }
    out
}

/// Writes an extended cascade; every event needs user metadata.
pub fn write_extended_cascade(cascade: &Cascade) -> Result<String> {
    let mut out = format!("{EXTENDED_HEADER}\n");
    for (index, e) in cascade.events().iter().enumerate() {
        let u = e.user.as_ref().ok_or(Error::MissingMetadata { index })?;
        if u.user_key.is_empty() || u.user_key.contains([',', '\n', '\r']) {
            return Err(Error::Domain(format!("user_key {:?} cannot be written", u.user_key)));
        }
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            e.time, u.followers, u.friends, u.statuses, u.account_created, u.user_key
        );
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Test,
    /// Only used to build the past-user-success history.
    History,
    /// Assigned by a seeded random split at experiment time.
    Unassigned,
}

impl Split {
    fn parse(line: usize, cell: &str) -> Result<Self> {
        match cell.trim() {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            "history" => Ok(Split::History),
            "" => Ok(Split::Unassigned),
            other => Err(Error::parse(line, format!("unknown split {other:?}"))),
        }
    }

    fn label(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
            Split::History => "history",
            Split::Unassigned => "",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexEntry {
    pub id: String,
    /// Relative paths are resolved against the index file's directory.
    pub path: PathBuf,
    pub final_size: u64,
    pub initiator: String,
    pub start_time: Option<f64>,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetIndex {
    pub entries: Vec<IndexEntry>,
    pub base_dir: PathBuf,
}

impl DatasetIndex {
    pub fn parse(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut it = lines(text);
        let (header_line, header) = it.next().ok_or_else(|| Error::parse(1, "missing header"))?;
        if header.trim() != INDEX_HEADER {
            return Err(Error::parse(
                header_line,
                format!("expected header {INDEX_HEADER:?}, found {:?}", header.trim()),
            ));
        }
        let mut entries = Vec::new();
        for (line, row) in it {
            let cells: Vec<&str> = row.split(',').collect();
            field_count(line, &cells, 6)?;
            let id = cells[0].trim();
            if id.is_empty() || cells[1].trim().is_empty() {
                return Err(Error::parse(line, "id and path are required"));
            }
            let final_size = count(line, "final_size", cells[2])?;
            if final_size == 0 {
                return Err(Error::parse(line, "final_size must be at least 1"));
            }
            let start_time = match cells[4].trim() {
                "" => None,
                s => Some(number(line, "start_time", s)?),
            };
            entries.push(IndexEntry {
                id: id.to_string(),
                path: PathBuf::from(cells[1].trim()),
                final_size,
                initiator: cells[3].trim().to_string(),
                start_time,
                split: Split::parse(line, cells[5])?,
            });
        }
        Ok(DatasetIndex {
            entries,
            base_dir: base_dir.into(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        DatasetIndex::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn write(&self) -> String {
        let mut out = format!("{INDEX_HEADER}\n");
        for e in &self.entries {
            let start = e.start_time.map_or(String::new(), |s| s.to_string());
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                e.id,
                e.path.display(),
                e.final_size,
                e.initiator,
                start,
                e.split.label()
            );
        }
        out
    }

    pub fn resolve(&self, entry: &IndexEntry) -> PathBuf {
        self.base_dir.join(&entry.path)
    }

    /// Labels entries starting before `cutoff` as training data and the
    /// rest as test data; history entries keep their label.
    pub fn split_by_date(&mut self, cutoff: f64) -> Result<()> {
        for e in &mut self.entries {
            if e.split == Split::History {
                continue;
            }
            let start = e
                .start_time
                .ok_or_else(|| Error::Config(format!("entry {} has no start_time for a date split", e.id)))?;
            e.split = if start < cutoff { Split::Train } else { Split::Test };
        }
        Ok(())
    }

    /// Loads every cascade, attaching the index's start time and checking
    /// that the final size covers the file's events.
    pub fn load_cascades(&self, format: Format) -> Result<Vec<(IndexEntry, Parsed)>> {
        self.entries
            .iter()
            .map(|entry| {
                let path = self.resolve(entry);
                let parsed = load_cascade(&path, format).map_err(|e| match e {
                    Error::Parse { line, message } => Error::Parse {
                        line,
                        message: format!("{}: {message}", path.display()),
                    },
                    other => other,
                })?;
                if (entry.final_size as usize) < parsed.cascade.len() {
                    return Err(Error::Domain(format!(
                        "{}: final_size {} is below the {} events on file",
                        entry.id,
                        entry.final_size,
                        parsed.cascade.len()
                    )));
                }
                let cascade = parsed.cascade.with_id(&entry.id);
                let cascade = match entry.start_time {
                    Some(s) => cascade.with_start_time(s),
                    None => cascade,
                };
                Ok((entry.clone(), Parsed { cascade, ..parsed }))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_examples() {
        let p = parse_basic_cascade("a", "time,magnitude\n0,100\n5,3\n").unwrap();
        assert_eq!(p.cascade.len(), 2);
        assert_eq!(p.clamped, 0);
        let p = parse_basic_cascade("a", "time,magnitude\r\n0,0\r\n5,3\r\n").unwrap();
        assert_eq!(p.cascade.events()[0].magnitude, 1.0);
        assert_eq!(p.clamped, 1);
        let err = parse_basic_cascade("a", "time,magnitude\n1,100\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn basic_rejections() {
        for (text, line) in [
            ("0,100\n5,3\n", 1),
            ("time,magnitude\n0,1\n5,3\n4,2\n", 4),
            ("time,magnitude\n0,1\n5,-3\n", 3),
            ("time,magnitude\n0,1\n5\n", 3),
            ("time,magnitude\n0,1\n5,x\n", 3),
            ("time,magnitude\n0,1\nNaN,1\n", 3),
            ("time,magnitude\n", 1),
        ] {
            match parse_basic_cascade("a", text) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?} gave {other:?}"),
            }
        }
    }

    #[test]
    fn extended_round_trip() {
        let text = "time,followers,friends,statuses,account_created,user_key\n\
                    0,120,5,900,1200000000,alice\n\
                    3.5,0,1,2,1300000000.5,bob\n\
                    9,40,4,4,1400000000,carol\n";
        let p = parse_extended_cascade("x", text).unwrap();
        assert_eq!(p.cascade.len(), 3);
        assert_eq!(p.clamped, 1);
        assert!(p.cascade.has_metadata());
        assert_eq!(write_extended_cascade(&p.cascade).unwrap(), text);
        let err = parse_extended_cascade("x", "time,magnitude\n0,1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = parse_extended_cascade("x", &text.replace("120", "12.5")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn basic_round_trip_and_lineage() {
        let text = "time,magnitude,generation,parent\n0,10,0,\n1.25,3,1,0\n2,1,2,1\n";
        let (p, lineage) = parse_basic_with_lineage("s", text).unwrap();
        assert_eq!(lineage.unwrap(), vec![(0, None), (1, Some(0)), (2, Some(1))]);
        let again = parse_basic_cascade("s", &write_basic_cascade(&p.cascade)).unwrap();
        assert_eq!(again.cascade, p.cascade);
        assert!(parse_basic_with_lineage("s", "time,magnitude,generation,parent\n0,1,0,0\n").is_err());
    }

    #[test]
    fn index_round_trip() {
        let text = "id,path,final_size,initiator,start_time,split\n\
                    c1,c1.csv,40,alice,1500000000,train\n\
                    c2,sub/c2.csv,7,bob,,\n";
        let idx = DatasetIndex::parse(text, "/data").unwrap();
        assert_eq!(idx.entries.len(), 2);
        assert_eq!(idx.entries[1].split, Split::Unassigned);
        assert_eq!(idx.resolve(&idx.entries[1]), PathBuf::from("/data/sub/c2.csv"));
        assert_eq!(idx.write(), text);
        let mut dated = idx.clone();
        assert!(dated.split_by_date(0.0).is_err());
        let bad = text.replace(",40,", ",0,");
        assert!(matches!(DatasetIndex::parse(&bad, "."), Err(Error::Parse { line: 2, .. })));
    }
}
