//! Propositional formulas: the goal language of the toy prover.
//!
//! Grammar, loosest binding first:
//!
//! ```text
//! imp  := or ( "->" imp )?          right-associative
//! or   := and ( "|" and )*          left-associative
//! and  := not ( "&" not )*          left-associative
//! not  := "~" not | atom | "true" | "false" | "(" imp ")"
//! ```

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use crate::error::ParseError;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Formula {
    Atom(String),
    True,
    False,
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
}

impl Formula {
    pub fn atom(name: impl Into<String>) -> Self {
        Formula::Atom(name.into())
    }

    pub fn not(a: Formula) -> Self {
        Formula::Not(Box::new(a))
    }

    pub fn and(a: Formula, b: Formula) -> Self {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Self {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn implies(a: Formula, b: Formula) -> Self {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn atoms(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        self.collect_atoms(&mut out);
        out
    }

    pub(crate) fn collect_atoms<'a>(&'a self, out: &mut BTreeSet<&'a str>) {
        match self {
            Formula::Atom(name) => {
                out.insert(name.as_str());
            }
            Formula::True | Formula::False => {}
            Formula::Not(a) => a.collect_atoms(out),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                a.collect_atoms(out);
                b.collect_atoms(out);
            }
        }
    }

    /// Evaluates under `value`, which maps atom names to truth values.
    pub fn eval(&self, value: &impl Fn(&str) -> bool) -> bool {
        match self {
            Formula::Atom(name) => value(name),
            Formula::True => true,
            Formula::False => false,
            Formula::Not(a) => !a.eval(value),
            Formula::And(a, b) => a.eval(value) && b.eval(value),
            Formula::Or(a, b) => a.eval(value) || b.eval(value),
            Formula::Implies(a, b) => !a.eval(value) || b.eval(value),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Formula::Atom(_) | Formula::True | Formula::False => 0,
            Formula::Not(a) => 1 + a.depth(),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => 1 + a.depth().max(b.depth()),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Formula::Implies(..) => 1,
            Formula::Or(..) => 2,
            Formula::And(..) => 3,
            Formula::Not(_) => 4,
            Formula::Atom(_) | Formula::True | Formula::False => 5,
        }
    }

    fn write_at(&self, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
        let wrap = self.precedence() < min_prec;
        if wrap {
            f.write_str("(")?;
        }
        match self {
            Formula::Atom(name) => f.write_str(name)?,
            Formula::True => f.write_str("true")?,
            Formula::False => f.write_str("false")?,
            Formula::Not(a) => {
                f.write_str("~")?;
                a.write_at(f, 4)?;
            }
            Formula::And(a, b) => {
                a.write_at(f, 3)?;
                f.write_str(" & ")?;
                b.write_at(f, 4)?;
            }
            Formula::Or(a, b) => {
                a.write_at(f, 2)?;
                f.write_str(" | ")?;
                b.write_at(f, 3)?;
            }
            Formula::Implies(a, b) => {
                a.write_at(f, 2)?;
                f.write_str(" -> ")?;
                b.write_at(f, 1)?;
            }
        }
        if wrap {
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_at(f, 0)
    }
}

impl FromStr for Formula {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_formula(s)
    }
}

pub fn is_identifier(text: &str) -> bool {
    let mut chars = text.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(is_ident_continue)
}

pub(crate) fn is_ident_continue(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '\''
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Ident(String),
    Tilde,
    Amp,
    Bar,
    Arrow,
    LParen,
    RParen,
    End,
}

impl Token {
    fn describe(&self) -> String {
        match self {
            Token::Ident(name) => format!("`{name}`"),
            Token::Tilde => "`~`".into(),
            Token::Amp => "`&`".into(),
            Token::Bar => "`|`".into(),
            Token::Arrow => "`->`".into(),
            Token::LParen => "`(`".into(),
            Token::RParen => "`)`".into(),
            Token::End => "end of input".into(),
        }
    }
}

fn tokenize(text: &str) -> Result<Vec<(Token, usize)>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let pos = i + 1;
        match c {
            c if c.is_whitespace() => {
                i += 1;
                continue;
            }
            '~' => tokens.push((Token::Tilde, pos)),
            '&' => tokens.push((Token::Amp, pos)),
            '|' => tokens.push((Token::Bar, pos)),
            '(' => tokens.push((Token::LParen, pos)),
            ')' => tokens.push((Token::RParen, pos)),
            '-' => {
                if chars.get(i + 1) == Some(&'>') {
                    tokens.push((Token::Arrow, pos));
                    i += 2;
                    continue;
                }
                return Err(ParseError::new(pos + 1, "`>`", found_char(chars.get(i + 1))));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && is_ident_continue(chars[i]) {
                    i += 1;
                }
                tokens.push((Token::Ident(chars[start..i].iter().collect()), pos));
                continue;
            }
            other => return Err(ParseError::new(pos, "a formula", format!("`{other}`"))),
        }
        i += 1;
    }
    tokens.push((Token::End, chars.len() + 1));
    Ok(tokens)
}

fn found_char(c: Option<&char>) -> String {
    match c {
        Some(c) => format!("`{c}`"),
        None => "end of input".into(),
    }
}

struct Parser {
    tokens: Vec<(Token, usize)>,
    next: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.next].0
    }

    fn position(&self) -> usize {
        self.tokens[self.next].1
    }

    fn bump(&mut self) -> Token {
        let tok = self.tokens[self.next].0.clone();
        if tok != Token::End {
            self.next += 1;
        }
        tok
    }

    fn error(&self, expected: &str) -> ParseError {
        ParseError::new(self.position(), expected, self.peek().describe())
    }

    fn implication(&mut self) -> Result<Formula, ParseError> {
        let lhs = self.disjunction()?;
        if *self.peek() == Token::Arrow {
            self.bump();
            let rhs = self.implication()?;
            return Ok(Formula::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn disjunction(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.conjunction()?;
        while *self.peek() == Token::Bar {
            self.bump();
            let rhs = self.conjunction()?;
            lhs = Formula::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn conjunction(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.negation()?;
        while *self.peek() == Token::Amp {
            self.bump();
            let rhs = self.negation()?;
            lhs = Formula::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn negation(&mut self) -> Result<Formula, ParseError> {
        match self.peek().clone() {
            Token::Tilde => {
                self.bump();
                Ok(Formula::not(self.negation()?))
            }
            Token::Ident(name) => {
                self.bump();
                Ok(match name.as_str() {
                    "true" => Formula::True,
                    "false" => Formula::False,
                    _ => Formula::Atom(name),
                })
            }
            Token::LParen => {
                self.bump();
                let inner = self.implication()?;
                if *self.peek() != Token::RParen {
                    return Err(self.error("`)`"));
                }
                self.bump();
                Ok(inner)
            }
            _ => Err(self.error("a formula")),
        }
    }
}

/// Parses a formula. Errors carry the 1-based column of the offending token.
pub fn parse_formula(text: &str) -> Result<Formula, ParseError> {
    let tokens = tokenize(text)?;
    let mut parser = Parser { tokens, next: 0 };
    let formula = parser.implication()?;
    if *parser.peek() != Token::End {
        return Err(parser.error("end of input"));
    }
    Ok(formula)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Formula {
        parse_formula(s).unwrap()
    }

    fn a(s: &str) -> Formula {
        Formula::atom(s)
    }

    #[test]
    fn implication_is_right_associative() {
        assert_eq!(p("p -> q -> r"), Formula::implies(a("p"), Formula::implies(a("q"), a("r"))));
    }

    #[test]
    fn negation_binds_tighter_than_conjunction() {
        assert_eq!(p("~p & q"), Formula::and(Formula::not(a("p")), a("q")));
    }

    #[test]
    fn unbalanced_parenthesis_reports_end_position() {
        let err = parse_formula("p -> (q").unwrap_err();
        assert_eq!(err.position, 8);
        assert_eq!(err.expected, "`)`");
    }

    #[test]
    fn precedence_chain() {
        assert_eq!(p("a | b & c -> d"), Formula::implies(Formula::or(a("a"), Formula::and(a("b"), a("c"))), a("d")));
        assert_eq!(p("a & b & c"), Formula::and(Formula::and(a("a"), a("b")), a("c")));
    }

    #[test]
    fn constants_and_primes() {
        assert_eq!(p("true & x'"), Formula::and(Formula::True, a("x'")));
        assert_eq!(p("~false"), Formula::not(Formula::False));
    }

    #[test]
    fn render_minimal_parentheses() {
        for text in ["(p -> q) -> r", "p -> q -> r", "p & (q | r)", "~(p & q)", "a | (b | c)"] {
            assert_eq!(p(text).to_string(), text);
        }
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_formula("").is_err());
        assert!(parse_formula("p q").is_err());
        assert!(parse_formula("p - q").is_err());
        assert!(parse_formula("p $ q").is_err());
        assert_eq!(parse_formula("p &").unwrap_err().position, 4);
    }

    #[test]
    fn identifiers() {
        assert!(is_identifier("set_cap_valid_objs"));
        assert!(is_identifier("_x'"));
        assert!(!is_identifier("1x"));
        assert!(!is_identifier(""));
    }
}
