use std::collections::HashSet;

use super::{DeclKind, Netlist, NetlistDecl, OpCode, Operand, ParseError, MAX_WIDTH};

/// Parse a netlist document.
///
/// `#` starts a comment unless the token is a sized literal such as
/// `#ff:8`. `module` and `end` lines are optional framing.
pub fn parse_netlist(text: &str) -> Result<Netlist, ParseError> {
    let mut netlist = Netlist::default();
    let mut names = HashSet::new();
    let mut next_targets = HashSet::new();
    let mut ended = false;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let tokens = tokenize(raw);
        if tokens.is_empty() {
            continue;
        }
        if ended {
            return Err(syntax(line, "statement after `end`"));
        }
        let mut cur = Cursor { tokens: &tokens, pos: 0, line };
        let keyword = cur.next("keyword")?;
        match keyword {
            "module" => {
                if netlist.name.is_some() || !netlist.decls.is_empty() {
                    return Err(syntax(line, "`module` must be the first statement"));
                }
                netlist.name = Some(cur.ident()?.to_string());
            }
            "end" => ended = true,
            "input" => {
                let name = cur.ident()?;
                let width = cur.width()?;
                netlist.decls.push(NetlistDecl {
                    line,
                    name: name.to_string(),
                    width,
                    kind: DeclKind::Input,
                });
            }
            "output" => {
                let name = cur.ident()?;
                let width = cur.width()?;
                cur.expect("=")?;
                let source = cur.operand()?;
                netlist.decls.push(NetlistDecl {
                    line,
                    name: name.to_string(),
                    width,
                    kind: DeclKind::Output { source },
                });
            }
            "reg" => {
                let name = cur.ident()?;
                let width = cur.width()?;
                cur.expect("=")?;
                let tok = cur.next("initial value")?;
                let init = parse_hex(tok).ok_or_else(|| syntax(line, format!("bad hex value `{tok}`")))?;
                if init & !super::mask(width) != 0 {
                    return Err(ParseError::ValueRange { line, value: init, width });
                }
                netlist.decls.push(NetlistDecl {
                    line,
                    name: name.to_string(),
                    width,
                    kind: DeclKind::Reg { init },
                });
            }
            "assign" => {
                let name = cur.ident()?;
                let width = cur.width()?;
                cur.expect("=")?;
                let op = cur.opcode()?;
                let mut operands = Vec::new();
                while !cur.done() {
                    operands.push(cur.operand()?);
                }
                if operands.len() != op.arity() {
                    return Err(ParseError::Arity {
                        line,
                        op: op.mnemonic(),
                        expected: op.arity(),
                        got: operands.len(),
                    });
                }
                netlist.decls.push(NetlistDecl {
                    line,
                    name: name.to_string(),
                    width,
                    kind: DeclKind::Assign { op, operands },
                });
            }
            "next" => {
                let name = cur.ident()?;
                cur.expect("=")?;
                let source = cur.operand()?;
                if !next_targets.insert(name.to_string()) {
                    return Err(ParseError::Duplicate { line, name: name.to_string() });
                }
                netlist.decls.push(NetlistDecl {
                    line,
                    name: name.to_string(),
                    width: 0,
                    kind: DeclKind::Next { source },
                });
                cur.finish()?;
                continue;
            }
            other => return Err(syntax(line, format!("unknown statement `{other}`"))),
        }
        cur.finish()?;
        if let Some(decl) = netlist.decls.last() {
            if decl.line == line && !names.insert(decl.name.clone()) {
                return Err(ParseError::Duplicate { line, name: decl.name.clone() });
            }
        }
    }
    Ok(netlist)
}

fn tokenize(raw: &str) -> Vec<&str> {
    let mut out = Vec::new();
    for tok in raw.split_whitespace() {
        if tok.starts_with('#') && (out.is_empty() || parse_literal(tok).is_none()) {
            break;
        }
        out.push(tok);
    }
    out
}

fn parse_hex(tok: &str) -> Option<u64> {
    let digits = tok.strip_prefix("0x").unwrap_or(tok);
    if digits.is_empty() {
        return None;
    }
    u64::from_str_radix(digits, 16).ok()
}

fn parse_literal(tok: &str) -> Option<(u64, u64)> {
    let body = tok.strip_prefix('#')?;
    let (hex, width) = body.split_once(':')?;
    let value = u64::from_str_radix(hex, 16).ok()?;
    let width = width.parse::<u64>().ok()?;
    Some((value, width))
}

fn is_ident(tok: &str) -> bool {
    let mut chars = tok.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn syntax(line: usize, msg: impl Into<String>) -> ParseError {
    ParseError::Syntax { line, msg: msg.into() }
}

struct Cursor<'a> {
    tokens: &'a [&'a str],
    pos: usize,
    line: usize,
}

impl<'a> Cursor<'a> {
    fn done(&self) -> bool {
        self.pos >= self.tokens.len()
    }

    fn next(&mut self, what: &str) -> Result<&'a str, ParseError> {
        let tok = self
            .tokens
            .get(self.pos)
            .ok_or_else(|| syntax(self.line, format!("expected {what}")))?;
        self.pos += 1;
        Ok(tok)
    }

    fn finish(&self) -> Result<(), ParseError> {
        match self.tokens.get(self.pos) {
            None => Ok(()),
            Some(tok) => Err(syntax(self.line, format!("unexpected token `{tok}`"))),
        }
    }

    fn expect(&mut self, lit: &str) -> Result<(), ParseError> {
        let tok = self.next(&format!("`{lit}`"))?;
        if tok == lit {
            Ok(())
        } else {
            Err(syntax(self.line, format!("expected `{lit}`, found `{tok}`")))
        }
    }

    fn ident(&mut self) -> Result<&'a str, ParseError> {
        let tok = self.next("identifier")?;
        if is_ident(tok) {
            Ok(tok)
        } else {
            Err(syntax(self.line, format!("bad identifier `{tok}`")))
        }
    }

    fn width(&mut self) -> Result<u32, ParseError> {
        let tok = self.next("width")?;
        let width: u64 = tok
            .parse()
            .map_err(|_| syntax(self.line, format!("bad width `{tok}`")))?;
        check_width(self.line, width)
    }

    fn number(&mut self, what: &str) -> Result<u32, ParseError> {
        let tok = self.next(what)?;
        tok.parse()
            .map_err(|_| syntax(self.line, format!("bad {what} `{tok}`")))
    }

    fn opcode(&mut self) -> Result<OpCode, ParseError> {
        let tok = self.next("operator")?;
        let op = match tok {
            "NOT" => OpCode::Not,
            "AND" => OpCode::And,
            "OR" => OpCode::Or,
            "XOR" => OpCode::Xor,
            "ADD" => OpCode::Add,
            "SUB" => OpCode::Sub,
            "MUL" => OpCode::Mul,
            "EQ" => OpCode::Eq,
            "LT" => OpCode::Lt,
            "MUX" => OpCode::Mux,
            "SHL" => OpCode::Shl,
            "SHR" => OpCode::Shr,
            "CONCAT" => OpCode::Concat,
            "SLICE" => {
                let hi = self.number("slice msb")?;
                let lo = self.number("slice lsb")?;
                OpCode::Slice { hi, lo }
            }
            other => return Err(ParseError::UnknownOp { line: self.line, op: other.to_string() }),
        };
        Ok(op)
    }

    fn operand(&mut self) -> Result<Operand, ParseError> {
        let tok = self.next("operand")?;
        if tok.starts_with('#') {
            let (value, width) =
                parse_literal(tok).ok_or_else(|| syntax(self.line, format!("bad literal `{tok}`")))?;
            let width = check_width(self.line, width)?;
            if value & !super::mask(width) != 0 {
                return Err(ParseError::ValueRange { line: self.line, value, width });
            }
            Ok(Operand::Literal { value, width })
        } else if is_ident(tok) {
            Ok(Operand::Name(tok.to_string()))
        } else {
            Err(syntax(self.line, format!("bad operand `{tok}`")))
        }
    }
}

fn check_width(line: usize, width: u64) -> Result<u32, ParseError> {
    if (1..=MAX_WIDTH as u64).contains(&width) {
        Ok(width as u32)
    } else {
        Err(ParseError::Width { line, width })
    }
}
