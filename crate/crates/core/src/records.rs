//! Line-delimited JSON records for annotations and ground-truthed items.
//!
//! Index fields accept either an integer or an option letter (`"A"` is 0,
//! case-insensitive) and are always written as integers. Unknown fields are
//! ignored on read. Blank lines are skipped.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::de::{self, DeserializeOwned, Deserializer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label_model::{Collected, CountSummary, EvaluationItem, LabelKind, Observation};

/// Option letter for an index: 0 is `A`. Indices past `Z` return `None`.
pub fn index_to_letter(index: usize) -> Option<char> {
    (index < 26).then(|| (b'A' + index as u8) as char)
}

pub fn letter_to_index(letter: char) -> Option<usize> {
    letter
        .is_ascii_alphabetic()
        .then(|| (letter.to_ascii_uppercase() as u8 - b'A') as usize)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawIndex {
    Int(u64),
    Text(String),
}

fn parse_index(raw: RawIndex) -> std::result::Result<usize, String> {
    match raw {
        RawIndex::Int(i) => Ok(i as usize),
        RawIndex::Text(s) => {
            let t = s.trim();
            if let Ok(i) = t.parse::<usize>() {
                return Ok(i);
            }
            let mut chars = t.chars();
            match (chars.next(), chars.next()) {
                (Some(c), None) => letter_to_index(c).ok_or_else(|| format!("bad option label {s:?}")),
                _ => Err(format!("bad option label {s:?}")),
            }
        }
    }
}

fn index_field<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<usize, D::Error> {
    parse_index(RawIndex::deserialize(d)?).map_err(de::Error::custom)
}

fn optional_index_field<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<usize>, D::Error> {
    Option::<RawIndex>::deserialize(d)?
        .map(parse_index)
        .transpose()
        .map_err(de::Error::custom)
}

/// One published annotation. Never carries the ground truth.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub id: String,
    pub k: usize,
    pub label_type: LabelKind,
    #[serde(deserialize_with = "index_field")]
    pub label_index: usize,
    #[serde(deserialize_with = "index_field")]
    pub prediction_index: usize,
    /// Option shuffle applied before labeling, `permutation[old] = new`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub permutation: Option<Vec<usize>>,
}

impl AnnotationRecord {
    pub fn to_observation(&self) -> Result<Observation> {
        Observation::new(self.id.clone(), self.label_type, self.label_index, self.prediction_index, self.k)
    }

    pub fn from_observation(obs: &Observation) -> Self {
        Self {
            id: obs.item_id.clone(),
            k: obs.num_options(),
            label_type: obs.kind(),
            label_index: obs.asserted_index(),
            prediction_index: obs.prediction_index(),
            permutation: None,
        }
    }

    pub fn from_collected(c: &Collected) -> Self {
        Self {
            permutation: Some(c.permutation.clone()),
            ..Self::from_observation(&c.observation)
        }
    }
}

/// A ground-truthed item, input to the labeling protocol.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemRecord {
    pub id: String,
    pub k: usize,
    #[serde(default, alias = "truth", deserialize_with = "optional_index_field")]
    pub truth_index: Option<usize>,
    #[serde(alias = "prediction", deserialize_with = "index_field")]
    pub prediction_index: usize,
}

impl ItemRecord {
    pub fn to_item(&self) -> Result<EvaluationItem> {
        EvaluationItem::new(self.id.clone(), self.k, self.truth_index, self.prediction_index)
    }
}

/// One prediction of a candidate system, keyed by item id. Annotation
/// records qualify, since extra fields are ignored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    #[serde(alias = "prediction", deserialize_with = "index_field")]
    pub prediction_index: usize,
}

fn read_lines<T: DeserializeOwned>(reader: impl BufRead, check: impl Fn(&T) -> Result<()>) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse { line: i + 1, message };
        let rec: T = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        check(&rec).map_err(|e| parse_err(e.to_string()))?;
        out.push(rec);
    }
    Ok(out)
}

/// Reads annotation records, validating each line.
pub fn read_annotations(reader: impl BufRead) -> Result<Vec<AnnotationRecord>> {
    read_lines(reader, |r: &AnnotationRecord| r.to_observation().map(|_| ()))
}

/// Reads item records. Truth may be absent here; collection rejects it later.
pub fn read_items(reader: impl BufRead) -> Result<Vec<ItemRecord>> {
    read_lines(reader, |r: &ItemRecord| r.to_item().map(|_| ()))
}

pub fn read_predictions(reader: impl BufRead) -> Result<Vec<PredictionRecord>> {
    read_lines(reader, |_: &PredictionRecord| Ok(()))
}

pub fn write_records<T: Serialize>(mut writer: impl Write, records: &[T]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut writer, r).map_err(std::io::Error::from)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

/// Distinct `k` values in the records, ascending.
pub fn distinct_k(records: &[AnnotationRecord]) -> Vec<usize> {
    let mut ks: Vec<usize> = records.iter().map(|r| r.k).collect();
    ks.sort_unstable();
    ks.dedup();
    ks
}

/// Counts per `k`.
pub fn summarize_by_k(records: &[AnnotationRecord]) -> Result<BTreeMap<usize, CountSummary>> {
    let mut out: BTreeMap<usize, CountSummary> = BTreeMap::new();
    for r in records {
        let obs = r.to_observation()?;
        let s = match out.get_mut(&r.k) {
            Some(s) => s,
            None => out.entry(r.k).or_insert(CountSummary::empty(r.k)?),
        };
        s.record(obs.kind(), obs.indicator());
    }
    Ok(out)
}

/// Counts for a single-`k` file. Empty input is insufficient data.
pub fn summarize_records(records: &[AnnotationRecord]) -> Result<CountSummary> {
    let ks = distinct_k(records);
    match ks.as_slice() {
        [] => Err(Error::InsufficientData("no annotation records".into())),
        [_] => Ok(summarize_by_k(records)?.into_values().next().expect("one k")),
        _ => Err(Error::Domain(format!("mixed option counts in input: k = {ks:?}"))),
    }
}

pub fn observations(records: &[AnnotationRecord]) -> Result<Vec<Observation>> {
    records.iter().map(AnnotationRecord::to_observation).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn letters() {
        assert_eq!(index_to_letter(0), Some('A'));
        assert_eq!(index_to_letter(25), Some('Z'));
        assert_eq!(index_to_letter(26), None);
        assert_eq!(letter_to_index('c'), Some(2));
        assert_eq!(letter_to_index('1'), None);
    }

    #[test]
    fn reads_letters_and_ints_writes_ints() {
        let text = r#"{"id":"a","k":4,"label_type":"complementary","label_index":"B","prediction_index":0,"extra":true}

{"id":"b","k":4,"label_type":"ordinary","label_index":3,"prediction_index":"d"}
"#;
        let recs = read_annotations(text.as_bytes()).unwrap();
        assert_eq!(recs[0].label_index, 1);
        assert_eq!(recs[1].prediction_index, 3);
        let mut buf = Vec::new();
        write_records(&mut buf, &recs).unwrap();
        let out = String::from_utf8(buf).unwrap();
        assert_eq!(
            out.lines().next().unwrap(),
            r#"{"id":"a","k":4,"label_type":"complementary","label_index":1,"prediction_index":0}"#
        );
        assert_eq!(read_annotations(out.as_bytes()).unwrap(), recs);
    }

    #[test]
    fn errors_name_the_line() {
        let text = "{\"id\":\"a\",\"k\":3,\"label_type\":\"ordinary\",\"label_index\":0,\"prediction_index\":0}\n{\"id\":\"b\",\"k\":3,\"label_type\":\"ordinary\",\"label_index\":5,\"prediction_index\":0}\n";
        match read_annotations(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        match read_annotations("not json\n".as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn summaries() {
        let rec = |id: &str, k, t, l, p| AnnotationRecord {
            id: id.into(),
            k,
            label_type: t,
            label_index: l,
            prediction_index: p,
            permutation: None,
        };
        let recs = vec![
            rec("a", 4, LabelKind::Ordinary, 1, 1),
            rec("b", 4, LabelKind::Complementary, 1, 2),
            rec("c", 4, LabelKind::Complementary, 2, 2),
        ];
        let s = summarize_records(&recs).unwrap();
        assert_eq!((s.n_ordinary(), s.s_ordinary(), s.n_complementary(), s.s_complementary()), (1, 1, 2, 1));
        assert!(summarize_records(&[]).unwrap_err().is_insufficient_data());
        let mut mixed = recs.clone();
        mixed.push(rec("d", 3, LabelKind::Ordinary, 0, 0));
        assert!(summarize_records(&mixed).is_err());
        assert_eq!(summarize_by_k(&mixed).unwrap().len(), 2);
    }

    #[test]
    fn items_accept_missing_truth() {
        let text = "{\"id\":\"x\",\"k\":4,\"truth\":\"C\",\"prediction_index\":1}\n{\"id\":\"y\",\"k\":4,\"prediction_index\":1}\n";
        let items = read_items(text.as_bytes()).unwrap();
        assert_eq!(items[0].truth_index, Some(2));
        assert_eq!(items[1].truth_index, None);
    }
}
