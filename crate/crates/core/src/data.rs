//! Tick ingestion, cleaning, durations and the same-second and
//! monotone-price aggregation rules.

use std::collections::BTreeSet;
use std::io::{BufRead, Read, Write};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{Day, DurationData};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Session {
    PreOpen,
    Continuous,
    Extended,
}

impl FromStr for Session {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pre-open" | "preopen" | "pre" => Ok(Session::PreOpen),
            "continuous" | "regular" | "" => Ok(Session::Continuous),
            "extended" | "post" => Ok(Session::Extended),
            other => Err(format!("unknown session `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TradeFlag {
    Delayed,
    Corrected,
    Canceled,
    Incorrect,
}

impl FromStr for TradeFlag {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "delayed" => Ok(TradeFlag::Delayed),
            "corrected" => Ok(TradeFlag::Corrected),
            "canceled" | "cancelled" => Ok(TradeFlag::Canceled),
            "incorrect" => Ok(TradeFlag::Incorrect),
            other => Err(format!("unknown flag `{other}`")),
        }
    }
}

impl TradeFlag {
    pub const ALL: [TradeFlag; 4] = [TradeFlag::Delayed, TradeFlag::Corrected, TradeFlag::Canceled, TradeFlag::Incorrect];

    pub fn as_str(self) -> &'static str {
        match self {
            TradeFlag::Delayed => "delayed",
            TradeFlag::Corrected => "corrected",
            TradeFlag::Canceled => "canceled",
            TradeFlag::Incorrect => "incorrect",
        }
    }
}

/// Set of trade flags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub struct FlagSet(u8);

impl FlagSet {
    pub fn all() -> Self {
        TradeFlag::ALL.into_iter().collect()
    }

    pub fn contains(self, f: TradeFlag) -> bool {
        self.0 & (1 << f as u8) != 0
    }

    pub fn insert(&mut self, f: TradeFlag) {
        self.0 |= 1 << f as u8;
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn intersects(self, other: FlagSet) -> bool {
        self.0 & other.0 != 0
    }

    pub fn iter(self) -> impl Iterator<Item = TradeFlag> {
        TradeFlag::ALL.into_iter().filter(move |&f| self.contains(f))
    }
}

impl FromIterator<TradeFlag> for FlagSet {
    fn from_iter<I: IntoIterator<Item = TradeFlag>>(iter: I) -> Self {
        let mut set = FlagSet::default();
        for f in iter {
            set.insert(f);
        }
        set
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TickRecord {
    /// Trading-day label, e.g. a date.
    pub day: String,
    /// Seconds after midnight.
    pub timestamp: f64,
    pub price: f64,
    pub volume: f64,
    pub session: Session,
    pub flags: FlagSet,
}

/// Header names of the tick columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnMap {
    pub day: String,
    pub time: String,
    pub price: String,
    pub volume: String,
    /// Optional; absent means every record is in the continuous session.
    pub session: Option<String>,
    /// Optional; `|`-separated flag names.
    pub flags: Option<String>,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            day: "day".into(),
            time: "time".into(),
            price: "price".into(),
            volume: "volume".into(),
            session: Some("session".into()),
            flags: Some("flags".into()),
        }
    }
}

/// `HH:MM:SS` (fractional seconds allowed) or plain seconds after midnight.
pub fn parse_timestamp(s: &str) -> std::result::Result<f64, String> {
    let s = s.trim();
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("timestamp `{s}` is not HH:MM:SS"));
        }
        let h: u32 = parts[0].parse().map_err(|_| format!("bad hour in `{s}`"))?;
        let m: u32 = parts[1].parse().map_err(|_| format!("bad minute in `{s}`"))?;
        let sec: f64 = parts[2].parse().map_err(|_| format!("bad second in `{s}`"))?;
        if h > 23 || m > 59 || !(0.0..60.0).contains(&sec) {
            return Err(format!("timestamp `{s}` out of range"));
        }
        Ok(f64::from(h * 3600 + m * 60) + sec)
    } else {
        let v: f64 = s.parse().map_err(|_| format!("bad timestamp `{s}`"))?;
        if !(v >= 0.0 && v < 86_400.0) {
            return Err(format!("timestamp {v} outside one day"));
        }
        Ok(v)
    }
}

pub fn format_timestamp(t: f64) -> String {
    if t.fract() == 0.0 {
        let s = t as u64;
        format!("{:02}:{:02}:{:02}", s / 3600, s / 60 % 60, s % 60)
    } else {
        format!("{t}")
    }
}

/// Read delimited tick records with a header row.
pub fn read_ticks<R: Read>(input: R, columns: &ColumnMap) -> Result<Vec<TickRecord>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header_err = |e: csv::Error| Error::Parse {
        line: 1,
        message: e.to_string(),
    };
    let headers = reader.headers().map_err(header_err)?.clone();
    let find = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
            line: 1,
            message: format!("missing column `{name}`"),
        })
    };
    let (c_day, c_time, c_price, c_volume) = (find(&columns.day)?, find(&columns.time)?, find(&columns.price)?, find(&columns.volume)?);
    let c_session = columns.session.as_deref().and_then(|n| headers.iter().position(|h| h == n));
    let c_flags = columns.flags.as_deref().and_then(|n| headers.iter().position(|h| h == n));
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let bad = |message: String| Error::Parse { line, message };
        let field = |k: usize| record.get(k).unwrap_or("");
        let number = |k: usize, what: &str| -> Result<f64> {
            let v: f64 = field(k).parse().map_err(|_| bad(format!("bad {what} `{}`", field(k))))?;
            if !(v >= 0.0 && v.is_finite()) {
                return Err(bad(format!("{what} {v} must be nonnegative")));
            }
            Ok(v)
        };
        let session = match c_session {
            Some(k) => field(k).parse().map_err(bad)?,
            None => Session::Continuous,
        };
        let flags = match c_flags {
            Some(k) => field(k)
                .split('|')
                .filter(|f| !f.trim().is_empty())
                .map(|f| f.parse::<TradeFlag>())
                .collect::<std::result::Result<FlagSet, String>>()
                .map_err(bad)?,
            None => FlagSet::default(),
        };
        out.push(TickRecord {
            day: field(c_day).to_string(),
            timestamp: parse_timestamp(field(c_time)).map_err(bad)?,
            price: number(c_price, "price")?,
            volume: number(c_volume, "volume")?,
            session,
            flags,
        });
    }
    Ok(out)
}

pub fn write_ticks<W: Write>(out: W, ticks: &[TickRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(["day", "time", "price", "volume", "session", "flags"]).map_err(io)?;
    for t in ticks {
        let session = match t.session {
            Session::PreOpen => "pre-open",
            Session::Continuous => "continuous",
            Session::Extended => "extended",
        };
        let flags: Vec<&str> = t.flags.iter().map(TradeFlag::as_str).collect();
        w.write_record([
            t.day.clone(),
            format_timestamp(t.timestamp),
            format!("{}", t.price),
            format!("{}", t.volume),
            session.to_string(),
            flags.join("|"),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CleanConfig {
    pub sessions: BTreeSet<Session>,
    pub blacklist: FlagSet,
    /// Neighbours on each side in the aberrant-price window.
    pub window: usize,
    pub gamma: f64,
    /// Added to the neighbourhood MAD so flat stretches do not flag every
    /// price change.
    pub floor: f64,
}

impl Default for CleanConfig {
    fn default() -> Self {
        Self {
            sessions: [Session::Continuous].into_iter().collect(),
            blacklist: FlagSet::all(),
            window: 10,
            gamma: 10.0,
            floor: 0.01,
        }
    }
}

impl CleanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window < 1 {
            return Err(Error::Config("aberrant-price window must be at least 1".into()));
        }
        if !(self.gamma > 0.0) || !(self.floor >= 0.0) {
            return Err(Error::Config(format!("gamma {} must be positive and floor {} nonnegative", self.gamma, self.floor)));
        }
        Ok(())
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Records whose price sits more than `gamma (MAD + floor)` from the median
/// of their neighbours in the same day.
fn aberrant(ticks: &[TickRecord], cfg: &CleanConfig) -> Vec<bool> {
    let mut out = vec![false; ticks.len()];
    let mut start = 0;
    while start < ticks.len() {
        let end = start + ticks[start..].iter().take_while(|t| t.day == ticks[start].day).count();
        let n = end - start;
        for i in 0..n {
            if n < 3 {
                break;
            }
            let want = (2 * cfg.window).min(n - 1);
            let lo = i.saturating_sub(cfg.window).min(n - 1 - want);
            let mut nb: Vec<f64> = (lo..=lo + want).filter(|&k| k != i).map(|k| ticks[start + k].price).collect();
            let med = median(&mut nb);
            let mut dev: Vec<f64> = nb.iter().map(|p| (p - med).abs()).collect();
            let mad = median(&mut dev);
            out[start + i] = (ticks[start + i].price - med).abs() > cfg.gamma * (mad + cfg.floor);
        }
        start = end;
    }
    out
}

/// Keep records of the allowed sessions without blacklisted flags, then drop
/// aberrant prices until none remain. Order is preserved.
pub fn clean(ticks: &[TickRecord], cfg: &CleanConfig) -> Result<Vec<TickRecord>> {
    cfg.validate()?;
    let mut kept: Vec<TickRecord> = ticks
        .iter()
        .filter(|t| cfg.sessions.contains(&t.session) && !t.flags.intersects(cfg.blacklist))
        .cloned()
        .collect();
    loop {
        let flagged = aberrant(&kept, cfg);
        if !flagged.contains(&true) {
            return Ok(kept);
        }
        kept = kept.into_iter().zip(flagged).filter(|(_, f)| !f).map(|(t, _)| t).collect();
    }
}

/// Days in order of first appearance, each sorted by time.
fn by_day(ticks: &[TickRecord]) -> Vec<Vec<&TickRecord>> {
    let mut days: Vec<(&str, Vec<&TickRecord>)> = Vec::new();
    for t in ticks {
        match days.iter_mut().find(|(d, _)| *d == t.day) {
            Some((_, v)) => v.push(t),
            None => days.push((&t.day, vec![t])),
        }
    }
    days.into_iter()
        .map(|(_, mut v)| {
            v.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
            v
        })
        .collect()
}

/// Durations between consecutive trades of each day; data are discrete when
/// every timestamp is a whole second.
pub fn to_durations(ticks: &[TickRecord]) -> Result<DurationData> {
    let discrete = ticks.iter().all(|t| t.timestamp.fract() == 0.0);
    let days = by_day(ticks)
        .into_iter()
        .map(|v| Day::from_times(v.iter().map(|t| t.timestamp).collect()))
        .collect::<Result<Vec<_>>>()?;
    DurationData::new(days, discrete)
}

/// Collapse every set of trades sharing a time stamp into one trade.
pub fn aggregate_same_second(data: &DurationData) -> Result<DurationData> {
    let days = data
        .days
        .iter()
        .map(|d| {
            let mut times = d.times().to_vec();
            times.dedup();
            Day::from_times(times)
        })
        .collect::<Result<Vec<_>>>()?;
    DurationData::new(days, data.discrete)
}

#[derive(Clone, Copy, PartialEq)]
enum Direction {
    Flat,
    Up,
    Down,
}

/// Within each run of equal time stamps, collapse maximal monotone price
/// sequences into one trade. A price reversal starts a new sequence at the
/// reversing trade; equal prices extend the current one. The collapsed trade
/// carries the last price and the summed volume.
pub fn gw_collapse(ticks: &[TickRecord]) -> Vec<TickRecord> {
    let mut out = Vec::with_capacity(ticks.len());
    for day in by_day(ticks) {
        let mut i = 0;
        while i < day.len() {
            let mut merged = day[i].clone();
            let mut dir = Direction::Flat;
            let mut j = i + 1;
            while j < day.len() && day[j].timestamp == merged.timestamp {
                let p = day[j].price;
                let step = if p > merged.price {
                    Direction::Up
                } else if p < merged.price {
                    Direction::Down
                } else {
                    Direction::Flat
                };
                match (dir, step) {
                    (_, Direction::Flat) => {}
                    (Direction::Flat, s) => dir = s,
                    (d, s) if d != s => break,
                    _ => {}
                }
                merged.price = p;
                merged.volume += day[j].volume;
                j += 1;
            }
            out.push(merged);
            i = j;
        }
    }
    out
}

pub fn aggregate_gw(ticks: &[TickRecord]) -> Result<DurationData> {
    to_durations(&gw_collapse(ticks))
}

/// Trades, moments and the share of durations recorded as 0 to 5 seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptiveStats {
    /// Number of durations.
    pub trades: usize,
    pub mean: f64,
    pub std: f64,
    pub max: f64,
    pub cv: f64,
    /// Percent of durations equal to `k` seconds, `k = 0..=5`.
    pub share: [f64; 6],
}

impl DescriptiveStats {
    pub const HEADER: [&'static str; 11] = ["trades", "mean", "std", "max", "cv", "0s%", "1s%", "2s%", "3s%", "4s%", "5s%"];

    pub fn to_row(&self) -> String {
        let mut row = format!("{}\t{:.3}\t{:.3}\t{}\t{:.3}", self.trades, self.mean, self.std, self.max, self.cv);
        for s in self.share {
            row.push_str(&format!("\t{s:.1}"));
        }
        row
    }
}

pub fn descriptive_stats(data: &DurationData) -> DescriptiveStats {
    let y: Vec<f64> = data.all_durations().collect();
    let n = y.len();
    let mean = crate::diagnostics::mean(&y);
    let std = crate::diagnostics::variance(&y).sqrt();
    let mut share = [0.0; 6];
    for &v in &y {
        if v.fract() == 0.0 && v <= 5.0 {
            share[v as usize] += 1.0;
        }
    }
    share.iter_mut().for_each(|s| *s *= 100.0 / n.max(1) as f64);
    DescriptiveStats {
        trades: n,
        mean,
        std,
        max: y.iter().copied().fold(0.0, f64::max),
        cv: std / mean,
        share,
    }
}

pub const DURATIONS_MAGIC: &str = "# fscd-durations 1";

/// One row per duration: `day`, `t_prev`, `y`. Days without durations are
/// not written.
pub fn write_durations<W: Write>(mut out: W, data: &DurationData) -> Result<()> {
    writeln!(out, "{DURATIONS_MAGIC}")?;
    writeln!(out, "# discrete={}", data.discrete)?;
    writeln!(out, "day\tt_prev\ty")?;
    for (d, day) in data.days.iter().enumerate() {
        for (t, y) in day.times().iter().zip(day.durations()) {
            writeln!(out, "{d}\t{t:?}\t{y:?}")?;
        }
    }
    Ok(())
}

pub fn read_durations<R: BufRead>(input: R) -> Result<DurationData> {
    let mut discrete = None;
    let mut rows: Vec<(usize, f64, f64)> = Vec::new();
    for (k, line) in input.lines().enumerate() {
        let line = line?;
        let lineno = k + 1;
        let bad = |message: String| Error::Parse { line: lineno, message };
        match k {
            0 if line != DURATIONS_MAGIC => return Err(bad(format!("expected `{DURATIONS_MAGIC}`"))),
            0 | 2 => {}
            1 => {
                let v = line.strip_prefix("# discrete=").ok_or_else(|| bad("expected `# discrete=`".into()))?;
                discrete = Some(v.parse::<bool>().map_err(|e| bad(e.to_string()))?);
            }
            _ if line.is_empty() => {}
            _ => {
                let f: Vec<&str> = line.split('\t').collect();
                if f.len() != 3 {
                    return Err(bad(format!("{} fields, expected 3", f.len())));
                }
                let d = f[0].parse().map_err(|_| bad(format!("bad day `{}`", f[0])))?;
                let t = f[1].parse().map_err(|_| bad(format!("bad time `{}`", f[1])))?;
                let y: f64 = f[2].parse().map_err(|_| bad(format!("bad duration `{}`", f[2])))?;
                if let Some(&(d0, t0, y0)) = rows.last() {
                    if d == d0 && t != t0 + y0 {
                        return Err(bad(format!("time {t} does not follow {t0} + {y0}")));
                    }
                    if d < d0 {
                        return Err(bad("days out of order".into()));
                    }
                }
                rows.push((d, t, y));
            }
        }
    }
    let discrete = discrete.ok_or_else(|| Error::Parse {
        line: 2,
        message: "missing `# discrete=` line".into(),
    })?;
    let mut days = Vec::new();
    let mut i = 0;
    while i < rows.len() {
        let d = rows[i].0;
        let ys: Vec<f64> = rows[i..].iter().take_while(|r| r.0 == d).map(|r| r.2).collect();
        days.push(Day::from_durations(rows[i].1, &ys)?);
        i += ys.len();
    }
    DurationData::new(days, discrete)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tick(day: &str, t: f64, price: f64) -> TickRecord {
        TickRecord {
            day: day.into(),
            timestamp: t,
            price,
            volume: 100.0,
            session: Session::Continuous,
            flags: FlagSet::default(),
        }
    }

    fn durations(data: &DurationData) -> Vec<f64> {
        data.all_durations().collect()
    }

    #[test]
    fn timestamps() {
        assert_eq!(parse_timestamp("09:30:00"), Ok(34_200.0));
        assert_eq!(parse_timestamp("34200"), Ok(34_200.0));
        assert_eq!(parse_timestamp("10:00:01.5"), Ok(36_001.5));
        assert!(parse_timestamp("25:00:00").is_err());
        assert!(parse_timestamp("9:30").is_err());
        assert_eq!(format_timestamp(34_261.0), "09:31:01");
    }

    #[test]
    fn reads_with_line_numbers() {
        let text = "day,time,price,volume,session,flags\n\
                    d1,09:30:00,10.0,100,continuous,\n\
                    d1,09:30:01,abc,100,continuous,\n";
        let err = read_ticks(text.as_bytes(), &ColumnMap::default()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let text = "day,time,price,volume,session,flags\nd1,09:30:00,10.0,100,continuous,delayed|canceled\n";
        let t = read_ticks(text.as_bytes(), &ColumnMap::default()).unwrap();
        assert!(t[0].flags.contains(TradeFlag::Canceled) && t[0].flags.contains(TradeFlag::Delayed));
        assert!(!t[0].flags.contains(TradeFlag::Corrected));
        let missing = read_ticks("day,price\n".as_bytes(), &ColumnMap::default()).unwrap_err();
        assert!(missing.to_string().contains("time"));
    }

    #[test]
    fn write_read_round_trip() {
        let mut ticks = vec![tick("a", 34_200.0, 10.0), tick("a", 34_201.0, 10.01)];
        ticks[1].flags.insert(TradeFlag::Corrected);
        ticks[0].session = Session::PreOpen;
        let mut buf = Vec::new();
        write_ticks(&mut buf, &ticks).unwrap();
        assert_eq!(read_ticks(buf.as_slice(), &ColumnMap::default()).unwrap(), ticks);
    }

    #[test]
    fn cleaning_rules() {
        let mut ticks: Vec<TickRecord> = (0..30).map(|k| tick("d", 100.0 + k as f64, 10.0 + 0.01 * (k % 3) as f64)).collect();
        ticks[3].flags.insert(TradeFlag::Canceled);
        ticks[5].session = Session::PreOpen;
        ticks[12].price = 500.0;
        let cleaned = clean(&ticks, &CleanConfig::default()).unwrap();
        assert_eq!(cleaned.len(), 27);
        assert!(cleaned.iter().all(|t| t.price < 11.0));
        assert!(!cleaned.iter().any(|t| t.timestamp == 103.0 || t.timestamp == 105.0));
        assert!(cleaned.windows(2).all(|w| w[0].timestamp < w[1].timestamp));
        assert_eq!(clean(&cleaned, &CleanConfig::default()).unwrap(), cleaned);
        let bad = CleanConfig {
            window: 0,
            ..CleanConfig::default()
        };
        assert!(clean(&ticks, &bad).is_err());
    }

    #[test]
    fn durations_within_days() {
        let d = to_durations(&[tick("a", 10.0, 1.0), tick("a", 10.0, 1.0), tick("a", 11.0, 1.0)]).unwrap();
        assert_eq!(durations(&d), vec![0.0, 1.0]);
        assert!(d.discrete);
        let single = to_durations(&[tick("a", 10.0, 1.0)]).unwrap();
        assert_eq!(single.n_durations(), 0);
        let times = [("x", 1.0), ("x", 3.0), ("x", 3.0), ("x", 7.0), ("y", 2.0), ("y", 4.0), ("y", 9.0)];
        let ticks: Vec<_> = times.iter().map(|&(d, t)| tick(d, t, 1.0)).collect();
        let data = to_durations(&ticks).unwrap();
        assert_eq!(data.n_durations(), 5);
        assert_eq!(data.days[0].durations(), &[2.0, 0.0, 4.0]);
        assert_eq!(data.days[1].durations(), &[2.0, 5.0]);
    }

    #[test]
    fn same_second_rule() {
        let d = to_durations(&[tick("a", 10.0, 1.0), tick("a", 10.0, 1.0), tick("a", 11.0, 1.0)]).unwrap();
        assert_eq!(durations(&aggregate_same_second(&d).unwrap()), vec![1.0]);
        let plain = to_durations(&[tick("a", 10.0, 1.0), tick("a", 12.0, 1.0)]).unwrap();
        assert_eq!(aggregate_same_second(&plain).unwrap(), plain);
    }

    #[test]
    fn monotone_price_rule() {
        let up = [tick("a", 5.0, 10.0), tick("a", 5.0, 10.01), tick("a", 5.0, 10.02)];
        assert_eq!(gw_collapse(&up).len(), 1);
        let reversal = [tick("a", 5.0, 10.0), tick("a", 5.0, 10.02), tick("a", 5.0, 10.01)];
        let c = gw_collapse(&reversal);
        assert_eq!(c.len(), 2);
        assert_eq!((c[0].price, c[0].volume), (10.02, 200.0));
        let ties = [tick("a", 5.0, 10.0), tick("a", 5.0, 10.0), tick("a", 5.0, 9.99), tick("a", 5.0, 9.99)];
        assert_eq!(gw_collapse(&ties).len(), 1);
        let apart = [tick("a", 5.0, 10.0), tick("a", 6.0, 10.01), tick("a", 7.0, 10.02)];
        assert_eq!(gw_collapse(&apart).len(), 3);
        let d = aggregate_gw(&reversal).unwrap();
        assert_eq!(durations(&d), vec![0.0]);
    }

    #[test]
    fn stats_columns() {
        let day = Day::from_durations(0.0, &[0.0, 0.0, 1.0, 2.0]).unwrap();
        let s = descriptive_stats(&DurationData::new(vec![day], true).unwrap());
        assert_eq!(s.trades, 4);
        assert!((s.mean - 0.75).abs() < 1e-15);
        assert_eq!(s.share, [50.0, 25.0, 25.0, 0.0, 0.0, 0.0]);
        assert_eq!(s.max, 2.0);
        assert_eq!(s.to_row().split('\t').count(), DescriptiveStats::HEADER.len());
    }

    #[test]
    fn duration_file_round_trip() {
        let days = vec![
            Day::from_durations(34_200.0, &[0.0, 3.0, 1.0]).unwrap(),
            Day::from_durations(34_201.0, &[2.0]).unwrap(),
        ];
        let data = DurationData::new(days, true).unwrap();
        let mut buf = Vec::new();
        write_durations(&mut buf, &data).unwrap();
        assert_eq!(read_durations(buf.as_slice()).unwrap(), data);
        let broken = format!("{DURATIONS_MAGIC}\n# discrete=true\nday\tt_prev\ty\n0\t1.0\t2.0\n0\t5.0\t1.0\n");
        assert!(matches!(read_durations(broken.as_bytes()), Err(Error::Parse { line: 5, .. })));
    }
}
