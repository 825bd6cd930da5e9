//! Law-expression grammar:
//!
//! ```text
//! law   := comp | "mix(" wcomp ("," wcomp)* ")"
//! wcomp := weight ":" comp
//! comp  := "point(" x ")"
//!        | "exp(rate=" r ["," "shift=" k] ")"
//!        | "erlang(k=" n ",rate=" r ["," "shift=" k] ")"
//!        | "unif(" a "," b ")"
//!        | "geomN(s=" s ",scale=" a ["," "shift=" k] ")"
//!        | "geomN0(s=" s ",scale=" a ["," "shift=" k] ")"
//! x     := decimal | "inf"
//! ```
//!
//! Whitespace is insignificant.

use thiserror::Error;

use super::{ExtendedLaw, LatticeStart, LawComponent, LawError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("syntax error at position {position}: {message}")]
pub struct ParseError {
    /// Byte offset into the original text.
    pub position: usize,
    pub message: String,
}

pub fn parse_law_expr(text: &str) -> Result<ExtendedLaw, LawError> {
    let mut p = Parser { text, pos: 0 };
    let law = p.law()?;
    p.skip_ws();
    if p.pos != text.len() {
        return Err(p.error("trailing input").into());
    }
    Ok(law)
}

struct Parser<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError {
            position: self.pos,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        let rest = &self.text[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn peek_ident(&mut self) -> &'a str {
        self.skip_ws();
        let rest = &self.text[self.pos..];
        let end = rest
            .find(|c: char| !c.is_ascii_alphanumeric())
            .unwrap_or(rest.len());
        &rest[..end]
    }

    fn ident(&mut self) -> Result<&'a str, ParseError> {
        let id = self.peek_ident();
        if id.is_empty() {
            return Err(self.error("expected a name"));
        }
        self.pos += id.len();
        Ok(id)
    }

    fn expect(&mut self, token: char) -> Result<(), ParseError> {
        self.skip_ws();
        if self.text[self.pos..].starts_with(token) {
            self.pos += token.len_utf8();
            Ok(())
        } else {
            Err(self.error(format!("expected '{token}'")))
        }
    }

    fn eat(&mut self, token: char) -> bool {
        self.skip_ws();
        if self.text[self.pos..].starts_with(token) {
            self.pos += token.len_utf8();
            true
        } else {
            false
        }
    }

    fn keyword_arg(&mut self, name: &str) -> Result<(), ParseError> {
        let start = self.pos;
        let id = self.ident()?;
        if id != name {
            self.pos = start;
            self.skip_ws();
            return Err(self.error(format!("expected '{name}='")));
        }
        self.expect('=')
    }

    fn number_token(&mut self) -> Result<(usize, &'a str), ParseError> {
        self.skip_ws();
        let start = self.pos;
        let rest = &self.text[start..];
        let bytes = rest.as_bytes();
        let mut end = 0;
        while end < bytes.len() {
            let c = bytes[end];
            let sign_ok = (c == b'+' || c == b'-')
                && (end == 0 || matches!(bytes[end - 1], b'e' | b'E'));
            if c.is_ascii_digit() || c == b'.' || c == b'e' || c == b'E' || sign_ok {
                end += 1;
            } else {
                break;
            }
        }
        if end == 0 {
            return Err(self.error("expected a number"));
        }
        self.pos += end;
        Ok((start, &rest[..end]))
    }

    fn real(&mut self) -> Result<f64, ParseError> {
        let (start, tok) = self.number_token()?;
        match tok.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(ParseError {
                position: start,
                message: format!("invalid number '{tok}'"),
            }),
        }
    }

    fn real_or_inf(&mut self) -> Result<f64, ParseError> {
        if self.peek_ident() == "inf" {
            self.pos += 3;
            return Ok(f64::INFINITY);
        }
        self.real()
    }

    fn integer(&mut self) -> Result<u32, ParseError> {
        let (start, tok) = self.number_token()?;
        tok.parse::<u32>().map_err(|_| ParseError {
            position: start,
            message: format!("expected a positive integer, got '{tok}'"),
        })
    }

    fn optional_shift(&mut self) -> Result<f64, ParseError> {
        if self.eat(',') {
            self.keyword_arg("shift")?;
            self.real()
        } else {
            Ok(0.0)
        }
    }

    fn law(&mut self) -> Result<ExtendedLaw, LawError> {
        if self.peek_ident() == "mix" {
            self.pos += 3;
            self.expect('(')?;
            let mut parts = Vec::new();
            loop {
                let weight = self.real()?;
                self.expect(':')?;
                parts.push((weight, self.component()?));
                if !self.eat(',') {
                    break;
                }
            }
            self.expect(')')?;
            ExtendedLaw::new(parts)
        } else {
            ExtendedLaw::single(self.component()?)
        }
    }

    fn component(&mut self) -> Result<LawComponent, LawError> {
        let name_pos = {
            self.skip_ws();
            self.pos
        };
        let name = self.ident()?;
        self.expect('(')?;
        let comp = match name {
            "point" => LawComponent::PointMass {
                at: self.real_or_inf()?,
            },
            "exp" => {
                self.keyword_arg("rate")?;
                let rate = self.real()?;
                let shift = self.optional_shift()?;
                LawComponent::Exponential { rate, shift }
            }
            "erlang" => {
                self.keyword_arg("k")?;
                let shape = self.integer()?;
                self.expect(',')?;
                self.keyword_arg("rate")?;
                let rate = self.real()?;
                let shift = self.optional_shift()?;
                LawComponent::Erlang { shape, rate, shift }
            }
            "unif" => {
                let low = self.real()?;
                self.expect(',')?;
                let high = self.real()?;
                LawComponent::Uniform { low, high }
            }
            "geomN" | "geomN0" => {
                self.keyword_arg("s")?;
                let success = self.real()?;
                self.expect(',')?;
                self.keyword_arg("scale")?;
                let scale = self.real()?;
                let shift = self.optional_shift()?;
                let start = if name == "geomN" {
                    LatticeStart::One
                } else {
                    LatticeStart::Zero
                };
                LawComponent::LatticeGeometric {
                    success,
                    scale,
                    shift,
                    start,
                }
            }
            other => {
                return Err(ParseError {
                    position: name_pos,
                    message: format!("unknown component '{other}'"),
                }
                .into())
            }
        };
        self.expect(')')?;
        comp.validate()?;
        Ok(comp)
    }
}
