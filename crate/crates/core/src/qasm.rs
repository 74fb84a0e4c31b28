//! OpenQASM 2.0 subset reader and writer.
//!
//! Accepted grammar: optional `OPENQASM 2.x;` header and `include` lines, a single `qreg`,
//! at most one `creg`, `measure`, `barrier` (ignored) and calls to the gates of
//! [`GateKind`] plus a few qelib1 aliases (`u`, `u1`, `u2`, `p`, `cnot`, `id`).
//! Angles are arithmetic expressions over float literals and `pi`.

use std::f64::consts::PI;
use std::fmt::Write as _;

use thiserror::Error;

use crate::circuit::{Circuit, Gate, GateKind};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QasmError {
    #[error("syntax error at {line}:{col}: {message}")]
    Syntax {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("unsupported gate '{0}'")]
    UnsupportedGate(String),
    #[error("unsupported statement '{0}'")]
    UnsupportedStatement(String),
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Int(u64),
    Real(f64),
    Str(String),
    LBracket,
    RBracket,
    LParen,
    RParen,
    Comma,
    Semi,
    Arrow,
    Plus,
    Minus,
    Star,
    Slash,
    LBrace,
    RBrace,
    Eq,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(src: &str) -> Result<Vec<Token>, QasmError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let err = |line, col, message: String| QasmError::Syntax { line, col, message };
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        let advance = |n: usize, i: &mut usize, col: &mut usize| {
            *i += n;
            *col += n;
        };
        match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => advance(1, &mut i, &mut col),
            '/' if chars.get(i + 1) == Some(&'/') => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            '/' if chars.get(i + 1) == Some(&'*') => {
                i += 2;
                col += 2;
                loop {
                    match chars.get(i) {
                        None => return Err(err(tl, tc, "unterminated block comment".into())),
                        Some('*') if chars.get(i + 1) == Some(&'/') => {
                            i += 2;
                            col += 2;
                            break;
                        }
                        Some('\n') => {
                            i += 1;
                            line += 1;
                            col = 1;
                        }
                        Some(_) => {
                            i += 1;
                            col += 1;
                        }
                    }
                }
            }
            '"' => {
                let start = i + 1;
                let mut j = start;
                while j < chars.len() && chars[j] != '"' && chars[j] != '\n' {
                    j += 1;
                }
                if j >= chars.len() || chars[j] != '"' {
                    return Err(err(tl, tc, "unterminated string".into()));
                }
                let s: String = chars[start..j].iter().collect();
                let n = j + 1 - i;
                advance(n, &mut i, &mut col);
                out.push(Token {
                    tok: Tok::Str(s),
                    line: tl,
                    col: tc,
                });
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut j = i;
                while j < chars.len() && (chars[j].is_ascii_alphanumeric() || chars[j] == '_') {
                    j += 1;
                }
                let s: String = chars[i..j].iter().collect();
                let n = j - i;
                advance(n, &mut i, &mut col);
                out.push(Token {
                    tok: Tok::Ident(s),
                    line: tl,
                    col: tc,
                });
            }
            c if c.is_ascii_digit()
                || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) =>
            {
                let mut j = i;
                let mut real = false;
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
                if j < chars.len() && chars[j] == '.' {
                    real = true;
                    j += 1;
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                }
                if j < chars.len() && (chars[j] == 'e' || chars[j] == 'E') {
                    let mut k = j + 1;
                    if k < chars.len() && (chars[k] == '+' || chars[k] == '-') {
                        k += 1;
                    }
                    if k < chars.len() && chars[k].is_ascii_digit() {
                        real = true;
                        j = k;
                        while j < chars.len() && chars[j].is_ascii_digit() {
                            j += 1;
                        }
                    }
                }
                let s: String = chars[i..j].iter().collect();
                let tok = if real {
                    Tok::Real(
                        s.parse()
                            .map_err(|_| err(tl, tc, format!("bad number '{s}'")))?,
                    )
                } else {
                    match s.parse::<u64>() {
                        Ok(v) => Tok::Int(v),
                        Err(_) => Tok::Real(
                            s.parse()
                                .map_err(|_| err(tl, tc, format!("bad number '{s}'")))?,
                        ),
                    }
                };
                let n = j - i;
                advance(n, &mut i, &mut col);
                out.push(Token {
                    tok,
                    line: tl,
                    col: tc,
                });
            }
            _ => {
                let (tok, n) = match c {
                    '[' => (Tok::LBracket, 1),
                    ']' => (Tok::RBracket, 1),
                    '(' => (Tok::LParen, 1),
                    ')' => (Tok::RParen, 1),
                    '{' => (Tok::LBrace, 1),
                    '}' => (Tok::RBrace, 1),
                    ',' => (Tok::Comma, 1),
                    ';' => (Tok::Semi, 1),
                    '+' => (Tok::Plus, 1),
                    '*' => (Tok::Star, 1),
                    '/' => (Tok::Slash, 1),
                    '-' if chars.get(i + 1) == Some(&'>') => (Tok::Arrow, 2),
                    '-' => (Tok::Minus, 1),
                    '=' if chars.get(i + 1) == Some(&'=') => (Tok::Eq, 2),
                    other => return Err(err(tl, tc, format!("unexpected character '{other}'"))),
                };
                advance(n, &mut i, &mut col);
                out.push(Token {
                    tok,
                    line: tl,
                    col: tc,
                });
            }
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    eof: (usize, usize),
    qreg: Option<(String, usize)>,
    creg: Option<(String, usize)>,
    circuit: Circuit,
}

enum Resolved {
    Gate(GateKind, Vec<f64>),
    Identity,
}

fn resolve_gate(name: &str, params: &[f64]) -> Option<Resolved> {
    let kind = match name {
        "h" => GateKind::H,
        "x" => GateKind::X,
        "y" => GateKind::Y,
        "z" => GateKind::Z,
        "s" => GateKind::S,
        "sdg" => GateKind::Sdg,
        "t" => GateKind::T,
        "tdg" => GateKind::Tdg,
        "rx" => GateKind::Rx,
        "ry" => GateKind::Ry,
        "rz" | "u1" | "p" => GateKind::Rz,
        "u3" | "u" | "U" => GateKind::U3,
        "u2" if params.len() == 2 => {
            return Some(Resolved::Gate(
                GateKind::U3,
                vec![PI / 2.0, params[0], params[1]],
            ))
        }
        "u2" => GateKind::U3,
        "cz" => GateKind::Cz,
        "cx" | "CX" | "cnot" => GateKind::Cx,
        "rzz" => GateKind::Rzz,
        "id" | "i" => return Some(Resolved::Identity),
        _ => return None,
    };
    Some(Resolved::Gate(kind, params.to_vec()))
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn here(&self) -> (usize, usize) {
        self.toks
            .get(self.pos)
            .map(|t| (t.line, t.col))
            .unwrap_or(self.eof)
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, QasmError> {
        let (line, col) = self.here();
        Err(QasmError::Syntax {
            line,
            col,
            message: message.into(),
        })
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|t| t.tok.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), QasmError> {
        if self.peek() == Some(&want) {
            self.pos += 1;
            Ok(())
        } else {
            self.error(format!("expected {what}"))
        }
    }

    fn ident(&mut self) -> Result<String, QasmError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => self.error("expected identifier"),
        }
    }

    fn int(&mut self) -> Result<usize, QasmError> {
        match self.peek() {
            Some(Tok::Int(v)) => {
                let v = *v;
                self.pos += 1;
                usize::try_from(v).or_else(|_| self.error("integer too large"))
            }
            _ => self.error("expected integer"),
        }
    }

    fn program(&mut self) -> Result<(), QasmError> {
        if self.peek() == Some(&Tok::Ident("OPENQASM".into())) {
            self.pos += 1;
            let version = match self.next() {
                Some(Tok::Real(v)) => v,
                Some(Tok::Int(v)) => v as f64,
                _ => {
                    self.pos -= 1;
                    return self.error("expected version number");
                }
            };
            if !(2.0..3.0).contains(&version) {
                return Err(QasmError::UnsupportedStatement(format!(
                    "OPENQASM {version}"
                )));
            }
            self.expect(Tok::Semi, "';'")?;
        }
        while self.peek().is_some() {
            self.statement()?;
        }
        if self.qreg.is_none() {
            return self.error("missing qreg declaration");
        }
        Ok(())
    }

    fn statement(&mut self) -> Result<(), QasmError> {
        let (sl, sc) = self.here();
        let name = self.ident()?;
        match name.as_str() {
            "include" => {
                match self.next() {
                    Some(Tok::Str(_)) => {}
                    _ => {
                        self.pos -= 1;
                        return self.error("expected file name string");
                    }
                }
                self.expect(Tok::Semi, "';'")
            }
            "qreg" | "creg" => {
                let reg = self.ident()?;
                self.expect(Tok::LBracket, "'['")?;
                let size = self.int()?;
                self.expect(Tok::RBracket, "']'")?;
                self.expect(Tok::Semi, "';'")?;
                if name == "qreg" {
                    if self.qreg.is_some() {
                        return Err(QasmError::UnsupportedStatement("second qreg".into()));
                    }
                    self.circuit = Circuit::new(size);
                    self.qreg = Some((reg, size));
                } else {
                    if self.creg.is_some() {
                        return Err(QasmError::UnsupportedStatement("second creg".into()));
                    }
                    self.creg = Some((reg, size));
                }
                Ok(())
            }
            "measure" => self.measure(),
            "barrier" => {
                self.args()?;
                self.expect(Tok::Semi, "';'")
            }
            "gate" | "opaque" | "if" | "reset" => Err(QasmError::UnsupportedStatement(name)),
            _ => self.gate_call(name, sl, sc),
        }
    }

    fn measure(&mut self) -> Result<(), QasmError> {
        let qubits = self.arg()?;
        self.expect(Tok::Arrow, "'->'")?;
        let creg = self.ident()?;
        match &self.creg {
            Some((name, _)) if *name == creg => {}
            _ => return self.error(format!("unknown classical register '{creg}'")),
        }
        let csize = self.creg.as_ref().map(|c| c.1).unwrap_or(0);
        let cbits = if self.peek() == Some(&Tok::LBracket) {
            self.pos += 1;
            let b = self.int()?;
            self.expect(Tok::RBracket, "']'")?;
            if b >= csize {
                return self.error(format!("classical bit {b} out of range"));
            }
            1
        } else {
            csize
        };
        if cbits != qubits.len() {
            return self.error("measure register size mismatch");
        }
        self.expect(Tok::Semi, "';'")?;
        for q in qubits {
            if !self.circuit.measured_qubits.contains(&q) {
                self.circuit.measured_qubits.push(q);
            }
        }
        Ok(())
    }

    /// `q[i]` or a whole register `q`.
    fn arg(&mut self) -> Result<Vec<usize>, QasmError> {
        let reg = self.ident()?;
        let (name, size) = match &self.qreg {
            Some(r) => r.clone(),
            None => return self.error("qreg must be declared before use"),
        };
        if reg != name {
            return self.error(format!("unknown quantum register '{reg}'"));
        }
        if self.peek() == Some(&Tok::LBracket) {
            self.pos += 1;
            let q = self.int()?;
            if q >= size {
                return self.error(format!("qubit index {q} out of range"));
            }
            self.expect(Tok::RBracket, "']'")?;
            Ok(vec![q])
        } else {
            Ok((0..size).collect())
        }
    }

    fn args(&mut self) -> Result<Vec<Vec<usize>>, QasmError> {
        let mut v = vec![self.arg()?];
        while self.peek() == Some(&Tok::Comma) {
            self.pos += 1;
            v.push(self.arg()?);
        }
        Ok(v)
    }

    fn gate_call(&mut self, name: String, line: usize, col: usize) -> Result<(), QasmError> {
        let mut params = Vec::new();
        if self.peek() == Some(&Tok::LParen) {
            self.pos += 1;
            if self.peek() != Some(&Tok::RParen) {
                params.push(self.expr()?);
                while self.peek() == Some(&Tok::Comma) {
                    self.pos += 1;
                    params.push(self.expr()?);
                }
            }
            self.expect(Tok::RParen, "')'")?;
        }
        let args = self.args()?;
        self.expect(Tok::Semi, "';'")?;
        if args.len() >= 3 {
            return Err(QasmError::UnsupportedGate(name));
        }
        let (kind, params) = match resolve_gate(&name, &params) {
            Some(Resolved::Gate(k, p)) => (k, p),
            Some(Resolved::Identity) => return Ok(()),
            None => return Err(QasmError::UnsupportedGate(name)),
        };
        if args.len() != kind.num_qubits() || params.len() != kind.num_params() {
            return Err(QasmError::Syntax {
                line,
                col,
                message: format!(
                    "gate '{name}' takes {} parameter(s) and {} qubit argument(s)",
                    kind.num_params(),
                    kind.num_qubits()
                ),
            });
        }
        // register arguments broadcast over the register for one-qubit gates
        if kind.num_qubits() == 1 {
            for &q in &args[0] {
                self.circuit.gates.push(Gate::new(kind, &[q], &params));
            }
            return Ok(());
        }
        if args[0].len() != 1 || args[1].len() != 1 {
            return Err(QasmError::UnsupportedStatement(format!(
                "register broadcast of '{name}'"
            )));
        }
        let gate = Gate::new(kind, &[args[0][0], args[1][0]], &params);
        self.circuit.try_push(gate).map_err(|e| QasmError::Syntax {
            line,
            col,
            message: e.to_string(),
        })
    }

    fn expr(&mut self) -> Result<f64, QasmError> {
        let mut v = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.pos += 1;
                    v += self.term()?;
                }
                Some(Tok::Minus) => {
                    self.pos += 1;
                    v -= self.term()?;
                }
                _ => return Ok(v),
            }
        }
    }

    fn term(&mut self) -> Result<f64, QasmError> {
        let mut v = self.unary()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.pos += 1;
                    v *= self.unary()?;
                }
                Some(Tok::Slash) => {
                    self.pos += 1;
                    v /= self.unary()?;
                }
                _ => return Ok(v),
            }
        }
    }

    fn unary(&mut self) -> Result<f64, QasmError> {
        match self.peek() {
            Some(Tok::Minus) => {
                self.pos += 1;
                Ok(-self.unary()?)
            }
            Some(Tok::Plus) => {
                self.pos += 1;
                self.unary()
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> Result<f64, QasmError> {
        match self.peek().cloned() {
            Some(Tok::Int(v)) => {
                self.pos += 1;
                Ok(v as f64)
            }
            Some(Tok::Real(v)) => {
                self.pos += 1;
                Ok(v)
            }
            Some(Tok::Ident(s)) if s == "pi" => {
                self.pos += 1;
                Ok(PI)
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let v = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(v)
            }
            _ => self.error("expected expression"),
        }
    }
}

/// Parses OpenQASM 2.0 source into a [`Circuit`].
pub fn parse_qasm(text: &str) -> Result<Circuit, QasmError> {
    let toks = lex(text)?;
    let eof = toks.last().map(|t| (t.line, t.col + 1)).unwrap_or((1, 1));
    let mut p = Parser {
        toks,
        pos: 0,
        eof,
        qreg: None,
        creg: None,
        circuit: Circuit::new(0),
    };
    p.program()?;
    Ok(p.circuit)
}

pub(crate) fn write_gate(out: &mut String, g: &Gate) {
    if g.kind == GateKind::Swap {
        let (a, b) = (g.qubits[0], g.qubits[1]);
        let _ = writeln!(
            out,
            "cx q[{a}],q[{b}];\ncx q[{b}],q[{a}];\ncx q[{a}],q[{b}];"
        );
        return;
    }
    out.push_str(g.kind.name());
    if !g.params.is_empty() {
        out.push('(');
        for (i, p) in g.params.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            let _ = write!(out, "{p}");
        }
        out.push(')');
    }
    out.push(' ');
    for (i, q) in g.qubits.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        let _ = write!(out, "q[{q}]");
    }
    out.push_str(";\n");
}

pub(crate) fn write_header(out: &mut String, c: &Circuit) {
    out.push_str("OPENQASM 2.0;\ninclude \"qelib1.inc\";\n");
    let _ = writeln!(out, "qreg q[{}];", c.num_qubits);
    if !c.measured_qubits.is_empty() {
        let _ = writeln!(out, "creg c[{}];", c.measured_qubits.len());
    }
}

pub(crate) fn write_measures(out: &mut String, c: &Circuit) {
    for (i, q) in c.measured_qubits.iter().enumerate() {
        let _ = writeln!(out, "measure q[{q}] -> c[{i}];");
    }
}

/// Emits a circuit as OpenQASM 2.0 text. `swap` gates are written as three `cx`.
pub fn emit_qasm(c: &Circuit) -> String {
    let mut out = String::new();
    write_header(&mut out, c);
    for g in &c.gates {
        write_gate(&mut out, g);
    }
    write_measures(&mut out, c);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_bell() {
        let c = parse_qasm("qreg q[2]; h q[0]; cx q[0],q[1];").unwrap();
        assert_eq!(c.num_qubits, 2);
        assert_eq!(
            c.gates,
            vec![
                Gate::new(GateKind::H, &[0], &[]),
                Gate::new(GateKind::Cx, &[0, 1], &[])
            ]
        );
    }

    #[test]
    fn parses_angle() {
        let c = parse_qasm("qreg q[1]; rz(0.5) q[0];").unwrap();
        assert_eq!(c.gates, vec![Gate::new(GateKind::Rz, &[0], &[0.5])]);
    }

    #[test]
    fn rejects_three_qubit_gate() {
        let e = parse_qasm("qreg q[3]; ccx q[0],q[1],q[2];").unwrap_err();
        assert_eq!(e, QasmError::UnsupportedGate("ccx".into()));
    }

    #[test]
    fn pi_expressions() {
        let c =
            parse_qasm("qreg q[1]; rz(pi/2) q[0]; rx(-3*pi/4) q[0]; ry(2*(pi-1)) q[0];").unwrap();
        assert!((c.gates[0].params[0] - PI / 2.0).abs() < 1e-15);
        assert!((c.gates[1].params[0] + 3.0 * PI / 4.0).abs() < 1e-15);
        assert!((c.gates[2].params[0] - 2.0 * (PI - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn full_header_and_measure() {
        let src = "OPENQASM 2.0;\ninclude \"qelib1.inc\";\nqreg q[3];\ncreg c[3];\n// comment\nh q;\ncz q[0],q[2];\nbarrier q;\nmeasure q -> c;\n";
        let c = parse_qasm(src).unwrap();
        assert_eq!(c.len(), 4);
        assert_eq!(c.measured_qubits, vec![0, 1, 2]);
    }

    #[test]
    fn syntax_errors_carry_position() {
        match parse_qasm("qreg q[2];\nh q[0]\ncx q[0],q[1];") {
            Err(QasmError::Syntax { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_qasm("qreg q[2]; h q[5];"),
            Err(QasmError::Syntax { .. })
        ));
        assert!(matches!(
            parse_qasm("qreg q[2]; cx q[1],q[1];"),
            Err(QasmError::Syntax { .. })
        ));
        assert!(matches!(
            parse_qasm("h q[0];"),
            Err(QasmError::Syntax { .. })
        ));
        assert!(matches!(
            parse_qasm("qreg q[2]; qreg r[2];"),
            Err(QasmError::UnsupportedStatement(_))
        ));
        assert!(matches!(
            parse_qasm("OPENQASM 3.0; qreg q[1];"),
            Err(QasmError::UnsupportedStatement(_))
        ));
    }

    #[test]
    fn emit_examples() {
        let mut c = Circuit::new(1);
        c.h(0);
        assert!(emit_qasm(&c).contains("h q[0];"));
        let empty = emit_qasm(&Circuit::new(2));
        assert_eq!(
            empty,
            "OPENQASM 2.0;\ninclude \"qelib1.inc\";\nqreg q[2];\n"
        );
    }

    #[test]
    fn aliases() {
        let c = parse_qasm("qreg q[2]; u1(0.25) q[0]; cnot q[0],q[1]; id q[1]; u2(0,pi) q[1];")
            .unwrap();
        let kinds: Vec<_> = c.gates.iter().map(|g| g.kind).collect();
        assert_eq!(kinds, vec![GateKind::Rz, GateKind::Cx, GateKind::U3]);
    }
}
