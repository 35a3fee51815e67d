//! UTC timestamps as integer milliseconds since the Unix epoch.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, NaiveDate, SecondsFormat, TimeZone, Utc};
use serde::{Deserialize, Serialize};

pub const MILLIS_PER_DAY: i64 = 86_400_000;

/// Julian date of the Unix epoch.
const UNIX_EPOCH_JD: f64 = 2_440_587.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Timestamp(pub i64);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid ISO-8601 timestamp `{0}`")]
pub struct TimestampParseError(pub String);

impl Timestamp {
    pub const fn from_millis(ms: i64) -> Self {
        Self(ms)
    }

    pub const fn millis(self) -> i64 {
        self.0
    }

    pub fn add_seconds(self, seconds: f64) -> Self {
        Self(self.0 + (seconds * 1000.0).round() as i64)
    }

    /// Seconds from `earlier` to `self`.
    pub fn seconds_since(self, earlier: Timestamp) -> f64 {
        (self.0 - earlier.0) as f64 / 1000.0
    }

    pub fn julian_date(self) -> f64 {
        UNIX_EPOCH_JD + self.0 as f64 / MILLIS_PER_DAY as f64
    }

    /// Timestamp from a four-digit year and a fractional day-of-year (1.0 = Jan 1 00:00).
    pub fn from_year_day(year: i32, day_of_year: f64) -> Self {
        let jan1 = NaiveDate::from_ymd_opt(year, 1, 1)
            .expect("year within chrono range")
            .and_hms_opt(0, 0, 0)
            .expect("midnight");
        let base = Utc.from_utc_datetime(&jan1).timestamp_millis();
        Self(base + ((day_of_year - 1.0) * MILLIS_PER_DAY as f64).round() as i64)
    }

    pub fn to_datetime(self) -> DateTime<Utc> {
        Utc.timestamp_millis_opt(self.0)
            .single()
            .expect("timestamp within chrono range")
    }

    pub fn to_iso8601(self) -> String {
        self.to_datetime().to_rfc3339_opts(SecondsFormat::Millis, true)
    }

    pub fn parse_iso8601(text: &str) -> Result<Self, TimestampParseError> {
        DateTime::parse_from_rfc3339(text.trim())
            .map(|dt| Self(dt.timestamp_millis()))
            .map_err(|_| TimestampParseError(text.to_string()))
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_iso8601())
    }
}

impl FromStr for Timestamp {
    type Err = TimestampParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse_iso8601(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iso_round_trip_keeps_millis() {
        let t = Timestamp::parse_iso8601("2018-04-25T14:30:32.181Z").unwrap();
        assert_eq!(t.to_iso8601(), "2018-04-25T14:30:32.181Z");
        assert_eq!(t.to_string().parse::<Timestamp>().unwrap(), t);
    }

    #[test]
    fn j2000_julian_date() {
        let t = Timestamp::parse_iso8601("2000-01-01T12:00:00Z").unwrap();
        assert_eq!(t.julian_date(), 2_451_545.0);
    }

    #[test]
    fn year_day_is_one_based() {
        let t = Timestamp::from_year_day(2018, 1.5);
        assert_eq!(t.to_iso8601(), "2018-01-01T12:00:00.000Z");
    }

    #[test]
    fn rejects_garbage() {
        assert!(Timestamp::parse_iso8601("yesterday").is_err());
    }
}
