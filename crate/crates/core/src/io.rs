//! JSON form of characteristic pairs.
//!
//! ```json
//! {"plus": {"points": [0.1, 0.45], "classes": []},
//!  "minus": {"points": ["1/5", "7/10"], "classes": [[0, 1]]}}
//! ```
//!
//! Class indices are 0-based positions in `points` as written. Points are
//! numbers or rational strings `"p/q"`; when every point is a rational string
//! the pair is also available in exact arithmetic.

use num_rational::Rational64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circle::{validate_marked_set, CharacteristicPair, CircleError, Coordinate, MarkClass, MarkedSet};

#[derive(Debug, Error)]
pub enum PairFormatError {
    #[error("malformed pair JSON at line {line}, column {column}: {message}")]
    Json { line: usize, column: usize, message: String },
    #[error("{side} side, point {index}: cannot read {text:?} as a rational p/q")]
    Rational { side: &'static str, index: usize, text: String },
    #[error("{side} side: {source}")]
    Invalid {
        side: &'static str,
        #[source]
        source: CircleError,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PointText {
    Number(f64),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetDto {
    pub points: Vec<PointText>,
    #[serde(default)]
    pub classes: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairDto {
    pub plus: SetDto,
    pub minus: SetDto,
}

/// A parsed pair, with the exact form when every input point was rational.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedPair {
    pub float: CharacteristicPair<f64>,
    pub exact: Option<CharacteristicPair<Rational64>>,
}

fn parse_rational(side: &'static str, index: usize, text: &str) -> Result<Rational64, PairFormatError> {
    let err = || PairFormatError::Rational {
        side,
        index,
        text: text.to_string(),
    };
    let (p, q) = match text.split_once('/') {
        Some((p, q)) => (p.trim(), q.trim()),
        None => (text.trim(), "1"),
    };
    let p: i64 = p.parse().map_err(|_| err())?;
    let q: i64 = q.parse().map_err(|_| err())?;
    if q == 0 {
        return Err(err());
    }
    Ok(Rational64::new(p, q))
}

fn build<C: Coordinate>(side: &'static str, points: &[C], classes: &[Vec<usize>]) -> Result<MarkedSet<C>, PairFormatError> {
    validate_marked_set(points, classes, C::default_tolerance()).map_err(|source| PairFormatError::Invalid { side, source })
}

fn side_sets(side: &'static str, dto: &SetDto) -> Result<(MarkedSet<f64>, Option<MarkedSet<Rational64>>), PairFormatError> {
    let mut floats = Vec::with_capacity(dto.points.len());
    let mut exact = Vec::with_capacity(dto.points.len());
    for (index, p) in dto.points.iter().enumerate() {
        match p {
            PointText::Number(x) => floats.push(*x),
            PointText::Text(t) => {
                let r = parse_rational(side, index, t)?;
                floats.push(r.to_f64());
                exact.push(r);
            }
        }
    }
    let float = build(side, &floats, &dto.classes)?;
    let exact = if exact.len() == dto.points.len() {
        Some(build(side, &exact, &dto.classes)?)
    } else {
        None
    };
    Ok((float, exact))
}

/// Parses and validates a pair.
pub fn parse_pair(text: &str) -> Result<ParsedPair, PairFormatError> {
    let dto: PairDto = serde_json::from_str(text).map_err(|e| PairFormatError::Json {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let (plus, plus_exact) = side_sets("plus", &dto.plus)?;
    let (minus, minus_exact) = side_sets("minus", &dto.minus)?;
    Ok(ParsedPair {
        float: CharacteristicPair::new(plus, minus),
        exact: plus_exact.zip(minus_exact).map(|(p, m)| CharacteristicPair::new(p, m)),
    })
}

fn set_dto(set: &MarkedSet<f64>) -> SetDto {
    SetDto {
        points: set.coordinates().into_iter().map(PointText::Number).collect(),
        classes: set
            .classes()
            .iter()
            .filter(|c| matches!(c, MarkClass::Pair(..)))
            .map(|c| c.members())
            .collect(),
    }
}

/// JSON form of a pair, with points in sorted order.
pub fn pair_to_json(pair: &CharacteristicPair<f64>) -> serde_json::Value {
    serde_json::to_value(PairDto {
        plus: set_dto(&pair.plus),
        minus: set_dto(&pair.minus),
    })
    .expect("pair serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let text = r#"{"plus": {"points": [0.45, 0.1], "classes": []},
                       "minus": {"points": [0.2, 0.7], "classes": [[0, 1]]}}"#;
        let parsed = parse_pair(text).unwrap();
        assert!(parsed.exact.is_none());
        assert_eq!(parsed.float.plus.coordinates(), vec![0.1, 0.45]);
        assert_eq!(parsed.float.minus.pair_count(), 1);
        let again = parse_pair(&pair_to_json(&parsed.float).to_string()).unwrap();
        assert_eq!(again.float, parsed.float);
    }

    #[test]
    fn rational_points_give_exact_pair() {
        let text = r#"{"plus": {"points": ["1/10", "9/20"]}, "minus": {"points": ["1/5", "7/10"], "classes": [[0,1]]}}"#;
        let parsed = parse_pair(text).unwrap();
        let exact = parsed.exact.unwrap();
        assert_eq!(exact.minus.coordinates()[1], Rational64::new(7, 10));
    }

    #[test]
    fn errors_carry_positions() {
        match parse_pair("{\"plus\": {\"points\": [0.1,]}}") {
            Err(PairFormatError::Json { line: 1, column, .. }) => assert!(column > 0),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_pair(r#"{"plus": {"points": ["1/0"]}, "minus": {"points": []}}"#),
            Err(PairFormatError::Rational { side: "plus", index: 0, .. })
        ));
        assert!(matches!(
            parse_pair(r#"{"plus": {"points": [0.1, 0.2, 0.3, 0.4], "classes": [[0, 2], [1, 3]]}, "minus": {"points": []}}"#),
            Err(PairFormatError::Invalid { side: "plus", source: CircleError::Intermingled { .. } })
        ));
    }
}
