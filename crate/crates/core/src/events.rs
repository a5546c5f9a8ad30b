//! Skip-event records and newline-delimited JSON ingestion.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use std::io::BufRead;

use crate::error::{Error, Result};

/// One playback termination: where within a track a stream stopped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkipEvent {
    #[serde(rename = "track")]
    pub track_id: String,
    #[serde(rename = "date")]
    pub stream_date: NaiveDate,
    pub region: String,
    #[serde(rename = "stop")]
    pub stop_time_s: f64,
    #[serde(rename = "dur")]
    pub track_duration_s: f64,
    pub completed: bool,
}

impl SkipEvent {
    /// Check the record invariants: a stop offset inside the track, and
    /// completed streams stopping exactly at the end.
    pub fn validate(&self) -> std::result::Result<(), String> {
        if !self.stop_time_s.is_finite() || !self.track_duration_s.is_finite() {
            return Err("non-finite time".into());
        }
        if self.track_duration_s <= 0.0 {
            return Err(format!("non-positive duration {}", self.track_duration_s));
        }
        if self.stop_time_s < 0.0 || self.stop_time_s > self.track_duration_s {
            return Err(format!(
                "stop {} outside [0, {}]",
                self.stop_time_s, self.track_duration_s
            ));
        }
        if self.completed && self.stop_time_s != self.track_duration_s {
            return Err("completed stream must stop at the track end".into());
        }
        Ok(())
    }
}

/// Iterator over a JSONL event stream. Unknown keys are ignored; malformed
/// lines surface as errors carrying their 1-based line number. Blank lines
/// are skipped.
pub struct EventReader<R: BufRead> {
    reader: R,
    line_no: usize,
    buf: String,
}

impl<R: BufRead> EventReader<R> {
    pub fn new(reader: R) -> Self {
        EventReader {
            reader,
            line_no: 0,
            buf: String::new(),
        }
    }
}

impl<R: BufRead> Iterator for EventReader<R> {
    type Item = Result<SkipEvent>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.buf.clear();
            self.line_no += 1;
            match self.reader.read_line(&mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => return Some(Err(e.into())),
            }
            let line = self.buf.trim();
            if line.is_empty() {
                continue;
            }
            let parsed: std::result::Result<SkipEvent, _> = serde_json::from_str(line);
            return Some(match parsed {
                Ok(ev) => match ev.validate() {
                    Ok(()) => Ok(ev),
                    Err(reason) => Err(Error::MalformedEvent {
                        line: self.line_no,
                        reason,
                    }),
                },
                Err(e) => Err(Error::MalformedEvent {
                    line: self.line_no,
                    reason: e.to_string(),
                }),
            });
        }
    }
}

/// Serialize one event as a JSONL line (no trailing newline).
pub fn event_to_json(ev: &SkipEvent) -> String {
    serde_json::to_string(ev).expect("event serialization cannot fail")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_event_and_ignores_unknown_keys() {
        let line = r#"{"track":"t1","date":"2026-03-01","region":"US","stop":12.34,"dur":201.0,"completed":false,"extra":42}"#;
        let mut rd = EventReader::new(line.as_bytes());
        let ev = rd.next().unwrap().unwrap();
        assert_eq!(ev.track_id, "t1");
        assert_eq!(ev.stop_time_s, 12.34);
        assert!(!ev.completed);
        assert!(rd.next().is_none());
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let input = "{\"track\":\"a\",\"date\":\"2026-01-01\",\"region\":\"US\",\"stop\":1.0,\"dur\":10.0,\"completed\":false}\nnot json\n";
        let mut rd = EventReader::new(input.as_bytes());
        assert!(rd.next().unwrap().is_ok());
        match rd.next().unwrap() {
            Err(Error::MalformedEvent { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected malformed event, got {other:?}"),
        }
    }

    #[test]
    fn invariant_violations_rejected() {
        let bad_stop = r#"{"track":"a","date":"2026-01-01","region":"US","stop":11.0,"dur":10.0,"completed":false}"#;
        let bad_completed = r#"{"track":"a","date":"2026-01-01","region":"US","stop":5.0,"dur":10.0,"completed":true}"#;
        for line in [bad_stop, bad_completed] {
            let mut rd = EventReader::new(line.as_bytes());
            assert!(matches!(
                rd.next().unwrap(),
                Err(Error::MalformedEvent { .. })
            ));
        }
    }

    #[test]
    fn jsonl_round_trip_is_exact() {
        let ev = SkipEvent {
            track_id: "t9".into(),
            stream_date: NaiveDate::from_ymd_opt(2026, 2, 17).unwrap(),
            region: "DE".into(),
            stop_time_s: 0.1 + 0.2,
            track_duration_s: 180.0,
            completed: false,
        };
        let line = event_to_json(&ev);
        let mut rd = EventReader::new(line.as_bytes());
        let back = rd.next().unwrap().unwrap();
        assert_eq!(back, ev);
        assert_eq!(back.stop_time_s.to_bits(), ev.stop_time_s.to_bits());
    }
}
