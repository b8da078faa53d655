//! Word mini-language.
//!
//! ```text
//! word  := item*
//! item  := atom ('s' | '^' N)*
//! atom  := 'g' | 'g:' SRC ',' DST ',' LETTER ',' IDX | 's' '(' word ')' | 's' atom | '(' word ')'
//! ```
//!
//! Products are written left to right, so the rightmost factor acts first.
//! `g` is `Γ(ξ)` for the `--xi` vector; a trailing `s` takes the adjoint,
//! `Γ(ξ)* = Γ(Sξ)`, so `gsg` is `Γ*Γ`. `s(...)` is the adjoint of a product.

use tomita_fock::bimodule::{Bimodule, BimoduleVector};

pub struct Parser<'a> {
    chars: Vec<char>,
    pos: usize,
    m: &'a Bimodule,
    xi: Option<&'a BimoduleVector>,
}

/// Parses `text` into the generators of the word, first-acting first.
pub fn parse_word(text: &str, m: &Bimodule, xi: Option<&BimoduleVector>) -> Result<Vec<BimoduleVector>, String> {
    let mut p = Parser {
        chars: text.chars().filter(|c| !c.is_whitespace()).collect(),
        pos: 0,
        m,
        xi,
    };
    let mut written = p.word()?;
    if p.pos != p.chars.len() {
        return Err(format!("unexpected `{}` at position {}", p.chars[p.pos], p.pos));
    }
    written.reverse();
    Ok(written)
}

impl Parser<'_> {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn word(&mut self) -> Result<Vec<BimoduleVector>, String> {
        let mut out = Vec::new();
        while let Some(c) = self.peek() {
            if c == ')' {
                break;
            }
            out.extend(self.item()?);
        }
        Ok(out)
    }

    fn item(&mut self) -> Result<Vec<BimoduleVector>, String> {
        let mut v = self.atom()?;
        loop {
            match self.peek() {
                Some('s') if self.chars.get(self.pos + 1) != Some(&'(') => {
                    self.pos += 1;
                    v = self.adjoint(v);
                }
                Some('^') => {
                    self.pos += 1;
                    let k = self.number()?;
                    v = v.iter().cloned().cycle().take(v.len() * k).collect();
                }
                _ => return Ok(v),
            }
        }
    }

    fn atom(&mut self) -> Result<Vec<BimoduleVector>, String> {
        match self.peek() {
            Some('g') => {
                self.pos += 1;
                if self.peek() == Some(':') {
                    self.pos += 1;
                    Ok(vec![self.explicit()?])
                } else {
                    self.xi
                        .cloned()
                        .map(|x| vec![x])
                        .ok_or_else(|| "`g` needs --xi".to_string())
                }
            }
            Some('s') => {
                self.pos += 1;
                let inner = self.atom()?;
                Ok(self.adjoint(inner))
            }
            Some('(') => {
                self.pos += 1;
                let inner = self.word()?;
                if self.peek() != Some(')') {
                    return Err("unbalanced parenthesis".into());
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(c) => Err(format!("unexpected `{c}` at position {}", self.pos)),
            None => Err("word ends early".into()),
        }
    }

    fn adjoint(&self, v: Vec<BimoduleVector>) -> Vec<BimoduleVector> {
        v.iter().rev().map(|x| self.m.apply_s(x)).collect()
    }

    fn number(&mut self) -> Result<usize, String> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        let s: String = self.chars[start..self.pos].iter().collect();
        s.parse().map_err(|_| format!("expected a number at position {start}"))
    }

    fn field(&mut self) -> Result<String, String> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c != ',') {
            self.pos += 1;
        }
        if self.peek() != Some(',') {
            return Err("explicit generator needs g:<src>,<dst>,<letter>,<idx>".into());
        }
        let s: String = self.chars[start..self.pos].iter().collect();
        self.pos += 1;
        Ok(s)
    }

    fn explicit(&mut self) -> Result<BimoduleVector, String> {
        let src = self.field()?;
        let dst = self.field()?;
        let letter = self.field()?;
        let idx = self.number()? as u32;
        basis_vector(self.m, &src, &dst, &letter, idx).map(BimoduleVector::basis)
    }
}

pub fn basis_vector(
    m: &Bimodule,
    src: &str,
    dst: &str,
    letter: &str,
    idx: u32,
) -> Result<tomita_fock::bimodule::BasisVector, String> {
    let f = m.fusion();
    let err = |e: tomita_fock::Error| e.to_string();
    m.basis_vector(
        f.index_of(src).map_err(err)?,
        f.index_of(dst).map_err(err)?,
        f.parse_letter(letter).map_err(err)?,
        idx,
    )
    .map_err(err)
}

/// `src,dst,letter,idx`.
pub fn parse_xi(text: &str, m: &Bimodule) -> Result<tomita_fock::bimodule::BasisVector, String> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    if parts.len() != 4 {
        return Err(format!("--xi expects src,dst,letter,idx, got `{text}`"));
    }
    let idx = parts[3]
        .parse()
        .map_err(|_| format!("bad multiplicity index `{}`", parts[3]))?;
    basis_vector(m, parts[0], parts[1], parts[2], idx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tomita_fock::suites::module;

    #[test]
    fn star_forms_agree() {
        let m = module("fib", "t=2").unwrap();
        let xi = BimoduleVector::basis(parse_xi("1,t,t,0", &m).unwrap());
        let a = parse_word("gsg", &m, Some(&xi)).unwrap();
        let b = parse_word("s(g) g", &m, Some(&xi)).unwrap();
        let c = parse_word("sg g", &m, Some(&xi)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
        // Rightmost acts first.
        assert_eq!(a[0], xi);
        assert_eq!(a[1], m.apply_s(&xi));
    }

    #[test]
    fn repetition_and_groups() {
        let m = module("trivial", "uniform:1").unwrap();
        let xi = BimoduleVector::basis(parse_xi("1,1,1,0", &m).unwrap());
        assert_eq!(parse_word("(gsg)^3", &m, Some(&xi)).unwrap().len(), 6);
        let w = parse_word("s(g g:1,1,1~,0)", &m, Some(&xi)).unwrap();
        assert_eq!(w.len(), 2);
        assert_eq!(w[0], m.apply_s(&xi));
    }

    #[test]
    fn explicit_labels_may_contain_carets() {
        let m = module("zmod:3", "uniform:1").unwrap();
        let w = parse_word("g:1,g^1,g^2,0 s", &m, None).unwrap();
        assert_eq!(w.len(), 1);
        assert!(parse_word("g", &m, None).is_err());
        assert!(parse_word("(g:1,g^1,g^2,0", &m, None).is_err());
        assert!(parse_word("g:1,g^1,g^1,0", &m, None).is_err());
    }
}
