use super::token::{Token, TokenKind, KEYWORDS};
use super::FrontendError;

/// Two-character operators, matched before the single-character ones.
const TWO_CHAR_OPS: &[&str] = &["<=", ">=", "==", "!=", "&&", "||"];
const ONE_CHAR_OPS: &[char] = &['+', '-', '*', '/', '%', '<', '>', '=', '!'];
const PUNCT: &[char] = &['(', ')', '{', '}', '[', ']', ';', ',', '.', ':'];

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: u32,
    col: u32,
}

impl<'a> Lexer<'a> {
    fn peek(&self) -> Option<char> {
        self.src.get(self.pos).map(|&b| b as char)
    }

    fn peek2(&self) -> Option<char> {
        self.src.get(self.pos + 1).map(|&b| b as char)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn error(&self, message: String) -> FrontendError {
        FrontendError::Lex { line: self.line, col: self.col, message }
    }
}

/// Splits MiniLang source into tokens. Comments (`//` to end of line and
/// `/* ... */`) and whitespace are stripped; concatenating the token texts
/// reproduces the remaining source content. Only ASCII source is accepted.
pub fn tokenize(source: &str) -> Result<Vec<Token>, FrontendError> {
    let mut lx = Lexer { src: source.as_bytes(), pos: 0, line: 1, col: 1 };
    let mut tokens = Vec::new();

    while let Some(c) = lx.peek() {
        if c.is_ascii_whitespace() {
            lx.bump();
            continue;
        }
        if c == '/' && lx.peek2() == Some('/') {
            while let Some(c) = lx.peek() {
                if c == '\n' {
                    break;
                }
                lx.bump();
            }
            continue;
        }
        if c == '/' && lx.peek2() == Some('*') {
            let (line, col) = (lx.line, lx.col);
            lx.bump();
            lx.bump();
            loop {
                match lx.peek() {
                    Some('*') if lx.peek2() == Some('/') => {
                        lx.bump();
                        lx.bump();
                        break;
                    }
                    Some(_) => {
                        lx.bump();
                    }
                    None => {
                        return Err(FrontendError::Lex {
                            line,
                            col,
                            message: "unterminated block comment".into(),
                        })
                    }
                }
            }
            continue;
        }

        let (line, col) = (lx.line, lx.col);
        if c.is_ascii_alphabetic() || c == '_' {
            let mut text = String::new();
            while let Some(c) = lx.peek() {
                if c.is_ascii_alphanumeric() || c == '_' {
                    text.push(c);
                    lx.bump();
                } else {
                    break;
                }
            }
            let kind = if KEYWORDS.contains(&text.as_str()) {
                TokenKind::Keyword
            } else {
                TokenKind::Ident
            };
            tokens.push(Token { kind, text, line, col });
            continue;
        }
        if c.is_ascii_digit() {
            let mut text = String::new();
            while let Some(c) = lx.peek() {
                if c.is_ascii_digit() {
                    text.push(c);
                    lx.bump();
                } else {
                    break;
                }
            }
            // A '.' continues the literal only when a digit follows, so that
            // `1.x` lexes as int, '.', ident.
            let mut kind = TokenKind::IntLit;
            if lx.peek() == Some('.') && lx.peek2().is_some_and(|c| c.is_ascii_digit()) {
                kind = TokenKind::FloatLit;
                text.push('.');
                lx.bump();
                while let Some(c) = lx.peek() {
                    if c.is_ascii_digit() {
                        text.push(c);
                        lx.bump();
                    } else {
                        break;
                    }
                }
            }
            tokens.push(Token { kind, text, line, col });
            continue;
        }
        if let Some(c2) = lx.peek2() {
            let pair: String = [c, c2].iter().collect();
            if TWO_CHAR_OPS.contains(&pair.as_str()) {
                lx.bump();
                lx.bump();
                tokens.push(Token { kind: TokenKind::Op, text: pair, line, col });
                continue;
            }
        }
        if c == '&' || c == '|' {
            return Err(lx.error(format!("illegal character '{c}' (did you mean '{c}{c}'?)")));
        }
        if ONE_CHAR_OPS.contains(&c) {
            lx.bump();
            tokens.push(Token { kind: TokenKind::Op, text: c.to_string(), line, col });
            continue;
        }
        if PUNCT.contains(&c) {
            lx.bump();
            tokens.push(Token { kind: TokenKind::Punct, text: c.to_string(), line, col });
            continue;
        }
        return Err(lx.error(format!("illegal character '{c}'")));
    }

    Ok(tokens)
}
