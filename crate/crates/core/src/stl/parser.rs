//! Recursive-descent parser for the formula DSL.
//!
//! ```text
//! formula  := term (("and" | "or") term)*
//! term     := "not" term | "(" formula ")" | temporal | pred
//! temporal := ("G" | "F") "[" bound "," bound "]" "(" formula ")"
//! bound    := integer | "END"
//! pred     := "sig" (">" | ">=") number | "delta" ">=" number | "|delta|" "<=" number
//! ```
//!
//! `and` and `or` share one precedence level and associate to the left.

use std::fmt;

use thiserror::Error;

use super::formula::{Bound, Formula, Interval, Predicate};

/// Parse failure with a 1-based character column into the input.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("at column {column}: {kind}")]
pub struct ParseError {
    pub column: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParseErrorKind {
    UnexpectedChar(char),
    Unexpected {
        expected: Vec<&'static str>,
        found: String,
    },
    NonNumericConstant(String),
    BadNumber(String),
    BadInterval {
        lo: u32,
        hi: u32,
    },
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::UnexpectedChar(c) => write!(f, "unexpected character {c:?}"),
            ParseErrorKind::Unexpected { expected, found } => {
                write!(f, "expected {}, found {found}", expected.join(" or "))
            }
            ParseErrorKind::NonNumericConstant(s) => {
                write!(f, "expected a numeric constant, found {s}")
            }
            ParseErrorKind::BadNumber(s) => write!(f, "number {s} is not a finite decimal"),
            ParseErrorKind::BadInterval { lo, hi } => {
                write!(
                    f,
                    "malformed interval [{lo},{hi}]: lower bound exceeds upper bound"
                )
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(String),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Pipe,
    Gt,
    Ge,
    Le,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "{s:?}"),
            Tok::Number(s) => write!(f, "number {s}"),
            Tok::LParen => f.write_str("\"(\""),
            Tok::RParen => f.write_str("\")\""),
            Tok::LBracket => f.write_str("\"[\""),
            Tok::RBracket => f.write_str("\"]\""),
            Tok::Comma => f.write_str("\",\""),
            Tok::Pipe => f.write_str("\"|\""),
            Tok::Gt => f.write_str("\">\""),
            Tok::Ge => f.write_str("\">=\""),
            Tok::Le => f.write_str("\"<=\""),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let column = i + 1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let single = match c {
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '[' => Some(Tok::LBracket),
            ']' => Some(Tok::RBracket),
            ',' => Some(Tok::Comma),
            '|' => Some(Tok::Pipe),
            _ => None,
        };
        if let Some(t) = single {
            toks.push((t, column));
            i += 1;
            continue;
        }
        match c {
            '>' | '<' => {
                let eq = chars.get(i + 1) == Some(&'=');
                let tok = match (c, eq) {
                    ('>', true) => Tok::Ge,
                    ('>', false) => Tok::Gt,
                    ('<', true) => Tok::Le,
                    _ => return Err(err(column, ParseErrorKind::UnexpectedChar('<'))),
                };
                toks.push((tok, column));
                i += if eq { 2 } else { 1 };
            }
            '-' | '.' | '0'..='9' => {
                let start = i;
                i += 1;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                toks.push((Tok::Number(chars[start..i].iter().collect()), column));
            }
            c if c.is_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                toks.push((Tok::Ident(chars[start..i].iter().collect()), column));
            }
            other => return Err(err(column, ParseErrorKind::UnexpectedChar(other))),
        }
    }
    toks.push((Tok::Eof, chars.len() + 1));
    Ok(toks)
}

fn err(column: usize, kind: ParseErrorKind) -> ParseError {
    ParseError { column, kind }
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn column(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if t != Tok::Eof {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, expected: &[&'static str]) -> ParseError {
        err(
            self.column(),
            ParseErrorKind::Unexpected {
                expected: expected.to_vec(),
                found: self.peek().to_string(),
            },
        )
    }

    fn expect(&mut self, tok: Tok, name: &'static str) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(&[name]))
        }
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn formula(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.term()?;
        loop {
            if self.is_keyword("and") {
                self.bump();
                lhs = Formula::and(lhs, self.term()?);
            } else if self.is_keyword("or") {
                self.bump();
                lhs = Formula::or(lhs, self.term()?);
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Formula, ParseError> {
        const TERM_START: &[&str] = &[
            "\"not\"",
            "\"(\"",
            "\"G\"",
            "\"F\"",
            "\"sig\"",
            "\"delta\"",
            "\"|\"",
        ];
        match self.peek().clone() {
            Tok::LParen => {
                self.bump();
                let f = self.formula()?;
                self.expect(Tok::RParen, "\")\"")?;
                Ok(f)
            }
            Tok::Pipe => {
                self.bump();
                if !self.is_keyword("delta") {
                    return Err(self.unexpected(&["\"delta\""]));
                }
                self.bump();
                self.expect(Tok::Pipe, "\"|\"")?;
                self.expect(Tok::Le, "\"<=\"")?;
                Ok(Formula::pred(Predicate::AbsDeltaLe(self.number()?)))
            }
            Tok::Ident(id) => match id.as_str() {
                "not" => {
                    self.bump();
                    Ok(Formula::not(self.term()?))
                }
                "G" | "F" => {
                    self.bump();
                    let interval = self.interval()?;
                    self.expect(Tok::LParen, "\"(\"")?;
                    let inner = self.formula()?;
                    self.expect(Tok::RParen, "\")\"")?;
                    Ok(if id == "G" {
                        Formula::always(interval, inner)
                    } else {
                        Formula::eventually(interval, inner)
                    })
                }
                "sig" => {
                    self.bump();
                    let strict = match self.peek() {
                        Tok::Gt => true,
                        Tok::Ge => false,
                        _ => return Err(self.unexpected(&["\">\"", "\">=\""])),
                    };
                    self.bump();
                    let k = self.number()?;
                    Ok(Formula::pred(if strict {
                        Predicate::SigGt(k)
                    } else {
                        Predicate::SigGe(k)
                    }))
                }
                "delta" => {
                    self.bump();
                    self.expect(Tok::Ge, "\">=\"")?;
                    Ok(Formula::pred(Predicate::DeltaGe(self.number()?)))
                }
                _ => Err(self.unexpected(TERM_START)),
            },
            _ => Err(self.unexpected(TERM_START)),
        }
    }

    fn interval(&mut self) -> Result<Interval, ParseError> {
        self.expect(Tok::LBracket, "\"[\"")?;
        let lo_col = self.column();
        let lo = match self.bound()? {
            Bound::Step(n) => n,
            Bound::End => {
                return Err(err(
                    lo_col,
                    ParseErrorKind::Unexpected {
                        expected: vec!["integer"],
                        found: "\"END\"".into(),
                    },
                ))
            }
        };
        self.expect(Tok::Comma, "\",\"")?;
        let hi = self.bound()?;
        self.expect(Tok::RBracket, "\"]\"")?;
        Interval::new(lo, hi).map_err(|_| {
            let Bound::Step(hi) = hi else { unreachable!() };
            err(lo_col, ParseErrorKind::BadInterval { lo, hi })
        })
    }

    fn bound(&mut self) -> Result<Bound, ParseError> {
        let column = self.column();
        match self.peek().clone() {
            Tok::Ident(s) if s == "END" => {
                self.bump();
                Ok(Bound::End)
            }
            Tok::Number(s) => {
                self.bump();
                s.parse::<u32>()
                    .map(Bound::Step)
                    .map_err(|_| err(column, ParseErrorKind::BadNumber(s)))
            }
            _ => Err(self.unexpected(&["integer", "\"END\""])),
        }
    }

    fn number(&mut self) -> Result<f64, ParseError> {
        let column = self.column();
        match self.peek().clone() {
            Tok::Number(s) => {
                self.bump();
                let digits = s.strip_prefix('-').unwrap_or(&s);
                let well_formed = !digits.is_empty()
                    && digits.chars().filter(|&c| c == '.').count() <= 1
                    && digits.chars().any(|c| c.is_ascii_digit());
                match s.parse::<f64>() {
                    Ok(v) if well_formed && v.is_finite() => Ok(v),
                    _ => Err(err(column, ParseErrorKind::BadNumber(s))),
                }
            }
            Tok::Eof => Err(self.unexpected(&["number"])),
            other => Err(err(
                column,
                ParseErrorKind::NonNumericConstant(other.to_string()),
            )),
        }
    }
}

/// Parse DSL text into a [`Formula`].
pub fn parse_formula(text: &str) -> Result<Formula, ParseError> {
    let mut p = Parser {
        toks: lex(text)?,
        pos: 0,
    };
    let f = p.formula()?;
    if *p.peek() != Tok::Eof {
        return Err(p.unexpected(&["\"and\"", "\"or\"", "end of input"]));
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_presets() {
        assert_eq!(
            parse_formula("F[1,END](sig > 0.7)").unwrap(),
            Formula::eventually(Interval::from(1), Formula::pred(Predicate::SigGt(0.7)))
        );
        assert_eq!(
            parse_formula("G[2,END](delta >= -0.1)").unwrap(),
            Formula::always(Interval::from(2), Formula::pred(Predicate::DeltaGe(-0.1)))
        );
        assert_eq!(
            parse_formula("  G [ 2 , END ] ( | delta | <= .2 ) ").unwrap(),
            Formula::always(Interval::from(2), Formula::pred(Predicate::AbsDeltaLe(0.2)))
        );
    }

    #[test]
    fn and_or_are_left_associative() {
        let f = parse_formula("sig > 0.1 or sig > 0.2 and sig > 0.3").unwrap();
        let p = |k| Formula::pred(Predicate::SigGt(k));
        assert_eq!(f, Formula::and(Formula::or(p(0.1), p(0.2)), p(0.3)));
    }

    #[test]
    fn reversed_interval_is_rejected() {
        let e = parse_formula("F[3,1](sig > 0.5)").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::BadInterval { lo: 3, hi: 1 });
        assert_eq!(e.column, 3);
    }

    #[test]
    fn non_numeric_constant() {
        let e = parse_formula("G[1,END](sig > high)").unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::NonNumericConstant(_)));
        assert_eq!(e.column, 16);
    }

    #[test]
    fn errors_carry_positions() {
        let cases = [
            ("", 1),
            ("sig", 4),
            ("sig < 0.5", 5),
            ("F[1,END](sig > 0.5", 19),
            ("F(1,END)", 2),
            ("sig > 0.5 xor sig > 0.1", 11),
            ("sig > 1.2.3", 7),
            ("F[END,3](sig > 0.5)", 3),
            ("delta > 0.1", 7),
            ("sig > 0.5 $", 11),
        ];
        for (text, column) in cases {
            let e = parse_formula(text).unwrap_err();
            assert_eq!(e.column, column, "{text:?}: {e}");
        }
    }

    #[test]
    fn error_message_lists_expectations() {
        let e = parse_formula("sig = 0.5").unwrap_err();
        assert_eq!(e.to_string(), "at column 5: unexpected character '='");
        let e = parse_formula("delta 0.5").unwrap_err();
        assert_eq!(
            e.to_string(),
            "at column 7: expected \">=\", found number 0.5"
        );
    }
}
