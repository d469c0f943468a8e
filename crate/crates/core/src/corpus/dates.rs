//! Accepted publication date formats.

use chrono::{DateTime, NaiveDate, Utc};

use super::CorpusError;

/// Parses an RFC 3339 date-time with offset, a bare ISO date (midnight UTC),
/// or an RFC 2822 date. Everything else is rejected.
pub fn parse_date(raw: &str) -> Result<DateTime<Utc>, CorpusError> {
    let s = raw.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Ok(dt.with_timezone(&Utc));
    }
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        // %Y accepts signed and short years; insist on the plain 10-char form.
        if s.len() == 10 {
            return Ok(d.and_hms_opt(0, 0, 0).expect("midnight is valid").and_utc());
        }
    }
    if let Ok(dt) = DateTime::parse_from_rfc2822(s) {
        return Ok(dt.with_timezone(&Utc));
    }
    Err(CorpusError::Date(raw.to_string()))
}
