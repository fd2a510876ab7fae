//! Shared surface syntax for terms: identifiers for free constants, `~n` for
//! nonce constants, `f(t1,...,tk)` for applications, and `vN` reserved for
//! trace positions.

use crate::term::Term;
use crate::theory::DeductionSystem;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}, col {col}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(line: usize, col: usize, message: impl Into<String>) -> Self {
        ParseError {
            line,
            col,
            message: message.into(),
        }
    }

    /// Re-anchors an error produced while parsing an isolated fragment to the
    /// line it came from.
    pub fn at_line(mut self, line: usize) -> Self {
        self.line = line;
        self
    }
}

/// How identifiers are interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseMode {
    /// Narration messages: ground terms only; `vN` is rejected, undeclared
    /// identifiers are free constants.
    GroundMessage,
    /// Rewrite-rule sides: undeclared identifiers are variables.
    RuleTerm,
    /// Recipes and tests: `vN` are positions, other identifiers must be
    /// declared 0-ary public symbols (contexts carry no constants).
    Context,
}

/// A cursor over one line of input.
pub struct Scanner<'a> {
    src: &'a str,
    pos: usize,
    line: usize,
}

impl<'a> Scanner<'a> {
    pub fn new(src: &'a str, line: usize) -> Self {
        Scanner { src, pos: 0, line }
    }

    pub fn col(&self) -> usize {
        self.pos + 1
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    pub fn skip_ws(&mut self) {
        while self.rest().starts_with([' ', '\t']) {
            self.pos += 1;
        }
    }

    pub fn at_end(&mut self) -> bool {
        self.skip_ws();
        self.rest().is_empty()
    }

    pub fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.rest().chars().next()
    }

    pub fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.rest().starts_with(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    pub fn expect(&mut self, c: char) -> Result<(), ParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            let found = match self.peek() {
                Some(got) => format!(", found '{got}'"),
                None => ", found end of line".to_string(),
            };
            Err(self.error(format!("expected '{c}'{found}")))
        }
    }

    pub fn error(&mut self, message: impl Into<String>) -> ParseError {
        self.skip_ws();
        ParseError::new(self.line, self.col(), message.into())
    }

    /// Reads an identifier: letters, digits, `_` and `'`, starting with a
    /// letter or `_`.
    pub fn ident(&mut self) -> Result<&'a str, ParseError> {
        self.skip_ws();
        let rest = self.rest();
        let mut len = 0;
        for c in rest.chars() {
            let ok = if len == 0 {
                c.is_ascii_alphabetic() || c == '_'
            } else {
                c.is_ascii_alphanumeric() || c == '_' || c == '\''
            };
            if !ok {
                break;
            }
            len += c.len_utf8();
        }
        if len == 0 {
            return Err(self.error(match rest.chars().next() {
                Some(c) => format!("expected identifier, found '{c}'"),
                None => "expected identifier, found end of line".to_string(),
            }));
        }
        self.pos += len;
        Ok(&rest[..len])
    }

    /// Reads a file-object name: like an identifier but hyphens and dots are
    /// allowed in the interior. Only used in header positions, where no
    /// arrow can follow.
    pub fn name(&mut self) -> Result<&'a str, ParseError> {
        let start = {
            self.skip_ws();
            self.pos
        };
        self.ident()?;
        let rest = &self.src[self.pos..];
        let mut extra = 0;
        for c in rest.chars() {
            let ok = c.is_ascii_alphanumeric() || matches!(c, '_' | '\'' | '-' | '.');
            if !ok {
                break;
            }
            extra += c.len_utf8();
        }
        self.pos += extra;
        Ok(&self.src[start..self.pos])
    }

    /// Parses one term in the given mode.
    pub fn term(&mut self, d: &DeductionSystem, mode: ParseMode) -> Result<Term, ParseError> {
        if self.eat('~') {
            let name = self.ident()?;
            if mode == ParseMode::Context {
                return Err(self.error("contexts may not contain nonce constants"));
            }
            return Ok(Term::nonce(name));
        }
        let start_col = {
            self.skip_ws();
            self.col()
        };
        let name = self.ident()?;
        if self.eat('(') {
            let sym = d
                .symbol(name)
                .ok_or_else(|| {
                    ParseError::new(self.line, start_col, format!("unknown symbol {name}"))
                })?
                .clone();
            let mut args = Vec::new();
            if !self.eat(')') {
                loop {
                    args.push(self.term(d, mode)?);
                    if self.eat(')') {
                        break;
                    }
                    self.expect(',')?;
                }
            }
            if args.len() != sym.arity {
                return Err(ParseError::new(
                    self.line,
                    start_col,
                    format!(
                        "symbol {} expects {} arguments, got {}",
                        sym.name,
                        sym.arity,
                        args.len()
                    ),
                ));
            }
            if mode == ParseMode::Context && !sym.public {
                return Err(ParseError::new(
                    self.line,
                    start_col,
                    format!("private symbol {} may not appear in a context", sym.name),
                ));
            }
            return Ok(Term::App(sym, args));
        }
        // Bare identifier.
        if let Some(sym) = d.symbol(name) {
            if sym.arity != 0 {
                return Err(ParseError::new(
                    self.line,
                    start_col,
                    format!("symbol {} expects {} arguments, got 0", name, sym.arity),
                ));
            }
            if mode == ParseMode::Context && !sym.public {
                return Err(ParseError::new(
                    self.line,
                    start_col,
                    format!("private symbol {name} may not appear in a context"),
                ));
            }
            return Ok(Term::App(sym.clone(), Vec::new()));
        }
        let is_position = Term::position_index(name).is_some();
        match mode {
            ParseMode::GroundMessage => {
                if is_position {
                    return Err(ParseError::new(
                        self.line,
                        start_col,
                        format!("{name} is a reserved position variable and may not appear in a message"),
                    ));
                }
                Ok(Term::free(name))
            }
            ParseMode::RuleTerm => Ok(Term::var(name)),
            ParseMode::Context => {
                if is_position {
                    Ok(Term::var(name))
                } else {
                    Err(ParseError::new(
                        self.line,
                        start_col,
                        format!("contexts may not contain the constant {name}"),
                    ))
                }
            }
        }
    }
}

/// Parses a complete string as one term.
pub fn parse_term_str(
    s: &str,
    d: &DeductionSystem,
    mode: ParseMode,
) -> Result<Term, ParseError> {
    let mut scanner = Scanner::new(s, 1);
    let t = scanner.term(d, mode)?;
    if !scanner.at_end() {
        return Err(scanner.error("unexpected trailing input"));
    }
    Ok(t)
}

/// Parses a ground message term.
pub fn parse_ground_term(s: &str, d: &DeductionSystem) -> Result<Term, ParseError> {
    parse_term_str(s, d, ParseMode::GroundMessage)
}

impl fmt::Debug for Scanner<'_> {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(out, "Scanner at {}:{}", self.line, self.col() - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::theory::DeductionSystem;

    #[test]
    fn parses_applications_and_nonces() {
        let d = DeductionSystem::classic();
        let t = parse_ground_term("enc(pair(A,~NA),KB)", &d).unwrap();
        assert_eq!(t.to_string(), "enc(pair(A,~NA),KB)");
    }

    #[test]
    fn rejects_unclosed_parenthesis() {
        let d = DeductionSystem::classic();
        let err = parse_ground_term("enc(a", &d).unwrap_err();
        assert!(err.message.contains("expected"), "{err}");
    }

    #[test]
    fn rejects_arity_mismatch() {
        let d = DeductionSystem::classic();
        let err = parse_ground_term("enc(a)", &d).unwrap_err();
        assert!(err.message.contains("expects 2 arguments"), "{err}");
    }

    #[test]
    fn positions_only_in_contexts() {
        let d = DeductionSystem::classic();
        assert!(parse_ground_term("v1", &d).is_err());
        let c = parse_term_str("pi1(dec(v7,v6))", &d, ParseMode::Context).unwrap();
        assert_eq!(c.to_string(), "pi1(dec(v7,v6))");
        assert!(parse_term_str("enc(v1,k)", &d, ParseMode::Context).is_err());
        assert!(parse_term_str("inv(v1)", &d, ParseMode::Context).is_err());
    }

    #[test]
    fn primed_identifiers() {
        let d = DeductionSystem::classic();
        let t = parse_ground_term("senc(a,k'')", &d).unwrap();
        assert_eq!(t.to_string(), "senc(a,k'')");
    }
}
