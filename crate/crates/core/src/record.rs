//! Correction records and their line format.
//!
//! ```text
//! cfg=<hex16> t=<round> src=<dec|gap|mark> flags=<hex2> delta=<bits> a=<A_t> f=<F_t> passes=<n> corr=<e,e,...|->
//! ```

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::flags::Flags;
use crate::gf2::BitVec;

/// Where a record came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Source {
    /// A round that reached the decoder.
    Decoded,
    /// A round that never arrived (erased or dropped on overflow).
    Gap,
    /// A framing or sequencing event; not a round.
    Marker,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Decoded => "dec",
            Source::Gap => "gap",
            Source::Marker => "mark",
        }
    }
}

impl FromStr for Source {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dec" => Ok(Source::Decoded),
            "gap" => Ok(Source::Gap),
            "mark" => Ok(Source::Marker),
            other => Err(Error::Format(format!("unknown record source {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CorrectionRecord {
    pub cfg_id: u64,
    pub round_t: u32,
    pub source: Source,
    pub flags: Flags,
    /// Overlap parity of the correction with each `logical_X`.
    pub logical_delta: BitVec,
    pub arrival: u64,
    pub finish: u64,
    pub pass_counter: u32,
    /// Ascending data-edge indices.
    pub correction: Vec<usize>,
}

impl CorrectionRecord {
    pub fn is_ok(&self) -> bool {
        self.flags.is_ok()
    }

    /// Records that stand for one round (not markers).
    pub fn is_round(&self) -> bool {
        self.source != Source::Marker
    }
}

impl fmt::Display for CorrectionRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "cfg={:016x} t={} src={} flags={:02x} delta={} a={} f={} passes={} corr=",
            self.cfg_id,
            self.round_t,
            self.source.as_str(),
            self.flags.bits(),
            self.logical_delta,
            self.arrival,
            self.finish,
            self.pass_counter,
        )?;
        if self.correction.is_empty() {
            return f.write_str("-");
        }
        for (i, e) in self.correction.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

fn bad(line: &str, why: &str) -> Error {
    Error::Format(format!("record `{line}`: {why}"))
}

impl FromStr for CorrectionRecord {
    type Err = Error;

    fn from_str(line: &str) -> Result<Self> {
        let mut fields = line.split_ascii_whitespace();
        let mut take = |key: &str| -> Result<&str> {
            let tok = fields.next().ok_or_else(|| bad(line, "too few fields"))?;
            tok.strip_prefix(key)
                .and_then(|rest| rest.strip_prefix('='))
                .ok_or_else(|| bad(line, &format!("expected `{key}=`")))
        };
        let int = |s: &str, what: &str| s.parse::<u64>().map_err(|_| bad(line, what));
        let cfg_id = u64::from_str_radix(take("cfg")?, 16).map_err(|_| bad(line, "cfg"))?;
        let round_t = int(take("t")?, "t")? as u32;
        let source = take("src")?.parse()?;
        let bits = u32::from_str_radix(take("flags")?, 16).map_err(|_| bad(line, "flags"))?;
        let flags = Flags::from_bits(bits).ok_or_else(|| bad(line, "unknown flag bits"))?;
        let delta = take("delta")?;
        let logical_delta = BitVec::from_bools(
            &delta
                .chars()
                .map(|c| match c {
                    '0' => Ok(false),
                    '1' => Ok(true),
                    _ => Err(bad(line, "delta")),
                })
                .collect::<Result<Vec<_>>>()?,
        );
        let arrival = int(take("a")?, "a")?;
        let finish = int(take("f")?, "f")?;
        let pass_counter = int(take("passes")?, "passes")? as u32;
        let corr = take("corr")?;
        let correction = if corr == "-" {
            Vec::new()
        } else {
            corr.split(',')
                .map(|e| e.parse::<usize>().map_err(|_| bad(line, "corr")))
                .collect::<Result<_>>()?
        };
        if fields.next().is_some() {
            return Err(bad(line, "trailing fields"));
        }
        Ok(Self {
            cfg_id,
            round_t,
            source,
            flags,
            logical_delta,
            arrival,
            finish,
            pass_counter,
            correction,
        })
    }
}

pub fn format_records(records: &[CorrectionRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&r.to_string());
        out.push('\n');
    }
    out
}

pub fn parse_records(text: &str) -> Result<Vec<CorrectionRecord>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(str::parse)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CorrectionRecord {
        CorrectionRecord {
            cfg_id: 0xdead_beef_0000_0001,
            round_t: 17,
            source: Source::Decoded,
            flags: Flags::OK,
            logical_delta: BitVec::from_bools(&[true]),
            arrival: 17000,
            finish: 17042,
            pass_counter: 3,
            correction: vec![2, 5],
        }
    }

    #[test]
    fn line_layout() {
        assert_eq!(
            sample().to_string(),
            "cfg=deadbeef00000001 t=17 src=dec flags=00 delta=1 a=17000 f=17042 passes=3 corr=2,5"
        );
    }

    #[test]
    fn round_trip() {
        let mut gap = sample();
        gap.source = Source::Gap;
        gap.flags = Flags::ERASURE;
        gap.correction.clear();
        gap.logical_delta = BitVec::from_bools(&[false, true]);
        let recs = vec![sample(), gap];
        let text = format_records(&recs);
        assert!(text.ends_with("delta=01 a=17000 f=17042 passes=3 corr=-\n"));
        assert_eq!(parse_records(&text).unwrap(), recs);
    }

    #[test]
    fn rejects_malformed() {
        let line = sample().to_string();
        for bad in [
            line.replace("t=17", "t=x"),
            line.replace("src=dec", "src=zzz"),
            line.replace("flags=00", "flags=80"),
            line.replace(" corr=2,5", ""),
            format!("{line} extra=1"),
        ] {
            assert!(bad.parse::<CorrectionRecord>().is_err(), "{bad}");
        }
    }
}
