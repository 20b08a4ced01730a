use std::io::BufRead;

use serde::{Deserialize, Serialize};

use super::IngestError;
use crate::canbus::{Label, TrafficRecord, MAX_STANDARD_ID};

/// One log row as read, before cleaning. `None` marks a missing or malformed field.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RawRecord {
    pub timestamp: Option<f64>,
    pub can_id_hex: Option<String>,
    pub dlc: Option<u32>,
    /// Space-separated hex bytes; may hold more than eight bytes.
    pub data_hex: Option<String>,
    pub label_text: Option<String>,
}

impl RawRecord {
    pub fn has_missing(&self) -> bool {
        self.timestamp.is_none() || self.can_id_hex.is_none() || self.dlc.is_none() || self.data_hex.is_none() || self.label_text.is_none()
    }

    pub fn label(&self) -> Option<Label> {
        parse_label(self.label_text.as_deref()?)
    }
}

/// Missing-value policy applied during cleaning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ImputePolicy {
    #[default]
    DropRow,
    FieldMean,
}

impl std::str::FromStr for ImputePolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "drop" | "drop-row" => Ok(ImputePolicy::DropRow),
            "mean" | "field-mean" => Ok(ImputePolicy::FieldMean),
            other => Err(format!("unknown impute policy `{other}` (expected drop or mean)")),
        }
    }
}

/// `Normal`/`0`/`R` map to Normal and `Attack`/`1`/`T` to Attack
/// (`R`/`T` being the flag convention of the public car-hacking logs).
pub fn parse_label(text: &str) -> Option<Label> {
    match text.trim() {
        "0" | "R" => Some(Label::Normal),
        "1" | "T" => Some(Label::Attack),
        t if t.eq_ignore_ascii_case("normal") => Some(Label::Normal),
        t if t.eq_ignore_ascii_case("attack") => Some(Label::Attack),
        _ => None,
    }
}

fn valid_hex_id(s: &str) -> Option<String> {
    let t = s.trim();
    let t = t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")).unwrap_or(t);
    if t.is_empty() {
        return None;
    }
    u32::from_str_radix(t, 16).ok().filter(|&v| v <= MAX_STANDARD_ID as u32).map(|_| t.to_string())
}

/// Splits a data field into bytes. Tokens are space separated; a token longer
/// than two digits is read as consecutive byte pairs.
pub fn parse_data_bytes(s: &str) -> Option<Vec<u8>> {
    let mut bytes = Vec::new();
    for token in s.split_whitespace() {
        if token.len() <= 2 {
            bytes.push(u8::from_str_radix(token, 16).ok()?);
        } else {
            if token.len() % 2 != 0 {
                return None;
            }
            for pair in token.as_bytes().chunks(2) {
                let pair = std::str::from_utf8(pair).ok()?;
                bytes.push(u8::from_str_radix(pair, 16).ok()?);
            }
        }
    }
    Some(bytes)
}

fn non_empty(s: &str) -> Option<&str> {
    let t = s.trim();
    (!t.is_empty()).then_some(t)
}

fn parse_row(fields: &[&str]) -> RawRecord {
    let get = |i: usize| fields.get(i).copied().and_then(non_empty);
    // Wide rows (one column per data byte) carry the label last.
    let dlc: Option<u32> = get(2).and_then(|d| d.parse().ok());
    let (data, label) = match fields.len() {
        n if n > 5 => {
            let bytes: Vec<&str> = fields[3..n - 1].iter().copied().filter_map(non_empty).collect();
            (Some(bytes.join(" ")), get(n - 1))
        }
        // A zero-length frame in the one-column-per-byte layout.
        4 if dlc == Some(0) => (Some(String::new()), get(3)),
        _ => match get(3) {
            Some(d) => (Some(d.to_string()), get(4)),
            None if dlc == Some(0) => (Some(String::new()), get(4)),
            None => (None, get(4)),
        },
    };
    RawRecord {
        timestamp: get(0).and_then(|t| t.parse::<f64>().ok()).filter(|t| t.is_finite()),
        can_id_hex: get(1).and_then(valid_hex_id),
        dlc,
        data_hex: data.filter(|d| parse_data_bytes(d).is_some()),
        label_text: label.filter(|l| parse_label(l).is_some()).map(str::to_string),
    }
}

fn is_header(line: &str) -> bool {
    line.split(',').next().is_some_and(|first| first.trim().parse::<f64>().is_err() && first.trim().eq_ignore_ascii_case("timestamp"))
}

/// Parses a comma-separated log. Row order is preserved; rows with neither an
/// identifier nor a data field are dropped.
pub fn parse_log<R: BufRead>(input: R) -> Result<Vec<RawRecord>, IngestError> {
    let mut records = Vec::new();
    let mut saw_row = false;
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| IngestError::UnreadableStream(e.to_string()))?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || (i == 0 && is_header(line)) {
            continue;
        }
        saw_row = true;
        let fields: Vec<&str> = line.split(',').collect();
        let record = parse_row(&fields);
        if record.can_id_hex.is_none() && record.data_hex.is_none() {
            continue;
        }
        records.push(record);
    }
    if !saw_row || records.is_empty() {
        return Err(IngestError::EmptyInput);
    }
    Ok(records)
}

/// Removes or fills missing fields so that every output row is complete.
///
/// `FieldMean` fills timestamp, identifier and DLC with the column mean of the
/// present values (identifier and DLC rounded to the nearest integer). A missing
/// data field becomes `dlc` zero bytes. Rows without a usable label are always
/// dropped since the label cannot be estimated.
pub fn impute_missing(records: &[RawRecord], policy: ImputePolicy) -> Result<Vec<RawRecord>, IngestError> {
    match policy {
        ImputePolicy::DropRow => Ok(records.iter().filter(|r| !r.has_missing()).cloned().collect()),
        ImputePolicy::FieldMean => {
            let mean = |values: Vec<f64>, column: &str| -> Result<f64, IngestError> {
                if values.is_empty() {
                    return Err(IngestError::AllRowsMissing(column.to_string()));
                }
                Ok(values.iter().sum::<f64>() / values.len() as f64)
            };
            let ts_mean = mean(records.iter().filter_map(|r| r.timestamp).collect(), "Timestamp")?;
            let id_mean = mean(
                records
                    .iter()
                    .filter_map(|r| r.can_id_hex.as_deref())
                    .map(|h| u32::from_str_radix(h, 16).expect("validated at parse") as f64)
                    .collect(),
                "CAN_ID",
            )?;
            let dlc_mean = mean(records.iter().filter_map(|r| r.dlc).map(f64::from).collect(), "DLC")?;
            Ok(records
                .iter()
                .filter(|r| r.label_text.is_some())
                .map(|r| {
                    let dlc = r.dlc.unwrap_or(dlc_mean.round() as u32);
                    RawRecord {
                        timestamp: Some(r.timestamp.unwrap_or(ts_mean)),
                        can_id_hex: Some(r.can_id_hex.clone().unwrap_or_else(|| format!("{:X}", id_mean.round() as u32))),
                        dlc: Some(dlc),
                        data_hex: Some(r.data_hex.clone().unwrap_or_else(|| vec!["00"; dlc.min(8) as usize].join(" "))),
                        label_text: r.label_text.clone(),
                    }
                })
                .collect())
        }
    }
}

/// Converts complete raw rows to typed records. Rows must be free of missing
/// fields (see [`impute_missing`]).
pub fn to_traffic_records(records: &[RawRecord]) -> Result<Vec<TrafficRecord>, IngestError> {
    records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let incomplete = || IngestError::IncompleteRow(i);
            let can_id = u16::from_str_radix(r.can_id_hex.as_deref().ok_or_else(incomplete)?, 16).map_err(|_| incomplete())?;
            let payload = parse_data_bytes(r.data_hex.as_deref().ok_or_else(incomplete)?).ok_or_else(incomplete)?;
            Ok(TrafficRecord {
                timestamp: r.timestamp.ok_or_else(incomplete)?,
                can_id,
                dlc: r.dlc.ok_or_else(incomplete)?.min(u8::MAX as u32) as u8,
                payload,
                label: r.label().ok_or_else(incomplete)?,
                attack: None,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Vec<RawRecord> {
        parse_log(text.as_bytes()).unwrap()
    }

    #[test]
    fn zero_length_frames_are_complete() {
        for text in ["1.0,0000,0,,1\n", "1.0,0000,0,R\n"] {
            let r = &parse(text)[0];
            assert_eq!(r.data_hex.as_deref(), Some(""), "{text}");
            assert!(!r.has_missing(), "{text}");
        }
        assert!(parse("1.0,0130,2,,0\n")[0].has_missing());
    }

    #[test]
    fn direct_field_mapping() {
        let r = &parse("0.123,0130,2,AB CD,0\n")[0];
        assert_eq!(
            r,
            &RawRecord {
                timestamp: Some(0.123),
                can_id_hex: Some("0130".into()),
                dlc: Some(2),
                data_hex: Some("AB CD".into()),
                label_text: Some("0".into()),
            }
        );
    }

    #[test]
    fn header_is_optional() {
        let with = parse("Timestamp,CAN_ID,DLC,Data_Field,Label\n1.0,0130,1,FF,1\n");
        let without = parse("1.0,0130,1,FF,1\n");
        assert_eq!(with, without);
    }

    #[test]
    fn empty_dlc_sets_missing() {
        let r = &parse("0.5,02B0,,01 02,Attack\n")[0];
        assert_eq!(r.dlc, None);
        assert!(r.has_missing());
        assert_eq!(r.label(), Some(Label::Attack));
    }

    #[test]
    fn wide_rows_with_byte_columns() {
        let r = &parse("1478198376.389427,0316,8,05,21,68,09,21,21,00,6f,R\n")[0];
        assert_eq!(r.data_hex.as_deref(), Some("05 21 68 09 21 21 00 6f"));
        assert_eq!(r.label(), Some(Label::Normal));
    }

    #[test]
    fn malformed_fields_do_not_abort() {
        let rows = parse("x,ZZZ,8,01,0\n1.0,0130,8,GG,maybe\n,,,,\n");
        // third row has neither id nor data and is rejected
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].timestamp, None);
        assert_eq!(rows[0].can_id_hex, None);
        assert_eq!(rows[1].data_hex, None);
        assert_eq!(rows[1].label_text, None);
    }

    #[test]
    fn empty_input() {
        assert_eq!(parse_log("".as_bytes()), Err(IngestError::EmptyInput));
        assert_eq!(parse_log("Timestamp,CAN_ID,DLC,Data_Field,Label\n".as_bytes()), Err(IngestError::EmptyInput));
    }

    #[test]
    fn impute_identity_without_missing() {
        let rows = parse("0.1,0130,2,AB CD,0\n0.2,02B0,1,01,1\n");
        assert_eq!(impute_missing(&rows, ImputePolicy::DropRow).unwrap(), rows);
        assert_eq!(impute_missing(&rows, ImputePolicy::FieldMean).unwrap(), rows);
    }

    #[test]
    fn drop_row_counts() {
        let mut text = String::new();
        for i in 0..10 {
            let dlc = if i % 3 == 0 && i > 0 { String::new() } else { "1".into() };
            text.push_str(&format!("{i}.0,0130,{dlc},01,0\n"));
        }
        let rows = parse(&text);
        assert_eq!(rows.iter().filter(|r| r.has_missing()).count(), 3);
        assert_eq!(impute_missing(&rows, ImputePolicy::DropRow).unwrap().len(), 7);
    }

    #[test]
    fn field_mean_fills_dlc() {
        let rows = parse("0.1,0130,8,01,0\n0.2,0130,,01,0\n0.3,0130,4,01,0\n");
        let out = impute_missing(&rows, ImputePolicy::FieldMean).unwrap();
        assert_eq!(out[1].dlc, Some(6));
        assert!(out.iter().all(|r| !r.has_missing()));
    }

    #[test]
    fn field_mean_with_empty_column() {
        let rows = parse("0.1,0130,,01,0\n0.2,0130,,01,0\n");
        assert_eq!(impute_missing(&rows, ImputePolicy::FieldMean), Err(IngestError::AllRowsMissing("DLC".into())));
    }

    #[test]
    fn converts_to_records() {
        let rows = parse("0.1,0130,2,AB CD,Attack\n");
        let recs = to_traffic_records(&rows).unwrap();
        assert_eq!(recs[0].can_id, 0x130);
        assert_eq!(recs[0].payload, vec![0xAB, 0xCD]);
        assert_eq!(recs[0].label, Label::Attack);
    }
}
