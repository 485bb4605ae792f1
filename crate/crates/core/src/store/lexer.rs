//! Tokenizer shared by the code-set filter language and the custom table
//! query dialect.

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum TokenKind {
    Ident(String),
    Str(String),
    Number(f64),
    Symbol(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Token {
    pub kind: TokenKind,
    /// Byte offset of the first character of the token.
    pub pos: usize,
}

impl Token {
    pub fn is_keyword(&self, kw: &str) -> bool {
        matches!(&self.kind, TokenKind::Ident(s) if s.eq_ignore_ascii_case(kw))
    }

    pub fn is_symbol(&self, sym: &str) -> bool {
        matches!(&self.kind, TokenKind::Symbol(s) if *s == sym)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct LexError {
    pub pos: usize,
    pub message: String,
}

const SYMBOLS: [&str; 15] = [
    "!=", "<>", "<=", ">=", "^=", "(", ")", ",", ".", "*", "=", "<", ">", "[", "]",
];

pub(crate) fn tokenize(input: &str) -> Result<Vec<Token>, LexError> {
    let mut tokens = Vec::new();
    let bytes = input.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = input[i..].chars().next().unwrap();
        if c.is_whitespace() {
            i += c.len_utf8();
            continue;
        }
        let start = i;
        if c == '\'' || c == '"' {
            // Quotes are escaped by doubling them.
            let quote = c;
            let mut text = String::new();
            i += 1;
            loop {
                let Some(ch) = input[i..].chars().next() else {
                    return Err(LexError {
                        pos: start,
                        message: "unterminated string literal".into(),
                    });
                };
                i += ch.len_utf8();
                if ch == quote {
                    if input[i..].starts_with(quote) {
                        text.push(quote);
                        i += 1;
                        continue;
                    }
                    break;
                }
                text.push(ch);
            }
            tokens.push(Token {
                kind: TokenKind::Str(text),
                pos: start,
            });
            continue;
        }
        if c.is_ascii_digit() || (c == '-' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            i += 1;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            let text = &input[start..i];
            let value = text.parse::<f64>().map_err(|_| LexError {
                pos: start,
                message: format!("malformed number '{text}'"),
            })?;
            tokens.push(Token {
                kind: TokenKind::Number(value),
                pos: start,
            });
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            while let Some(ch) = input[i..].chars().next() {
                if ch.is_alphanumeric() || ch == '_' {
                    i += ch.len_utf8();
                } else {
                    break;
                }
            }
            tokens.push(Token {
                kind: TokenKind::Ident(input[start..i].to_string()),
                pos: start,
            });
            continue;
        }
        match SYMBOLS.iter().find(|s| input[i..].starts_with(**s)) {
            Some(sym) => {
                i += sym.len();
                tokens.push(Token {
                    kind: TokenKind::Symbol(sym),
                    pos: start,
                });
            }
            None => {
                return Err(LexError {
                    pos: start,
                    message: format!("unexpected character '{c}'"),
                })
            }
        }
    }
    Ok(tokens)
}

/// Cursor over a token stream with the end-of-input position remembered for
/// error reporting.
pub(crate) struct Cursor {
    tokens: Vec<Token>,
    idx: usize,
    end: usize,
}

impl Cursor {
    pub fn new(tokens: Vec<Token>, end: usize) -> Self {
        Cursor { tokens, idx: 0, end }
    }

    pub fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.idx)
    }

    pub fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.idx).cloned();
        if t.is_some() {
            self.idx += 1;
        }
        t
    }

    pub fn pos(&self) -> usize {
        self.peek().map_or(self.end, |t| t.pos)
    }

    pub fn at_end(&self) -> bool {
        self.idx >= self.tokens.len()
    }

    pub fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.peek().is_some_and(|t| t.is_keyword(kw)) {
            self.idx += 1;
            true
        } else {
            false
        }
    }

    pub fn eat_symbol(&mut self, sym: &str) -> bool {
        if self.peek().is_some_and(|t| t.is_symbol(sym)) {
            self.idx += 1;
            true
        } else {
            false
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenizes_mixed_input() {
        let toks = tokenize("code_id ^= 'D' and x IN [\"a\", 'it''s'] -1.5").unwrap();
        let kinds: Vec<_> = toks.into_iter().map(|t| t.kind).collect();
        assert_eq!(
            kinds,
            vec![
                TokenKind::Ident("code_id".into()),
                TokenKind::Symbol("^="),
                TokenKind::Str("D".into()),
                TokenKind::Ident("and".into()),
                TokenKind::Ident("x".into()),
                TokenKind::Ident("IN".into()),
                TokenKind::Symbol("["),
                TokenKind::Str("a".into()),
                TokenKind::Symbol(","),
                TokenKind::Str("it's".into()),
                TokenKind::Symbol("]"),
                TokenKind::Number(-1.5),
            ]
        );
    }

    #[test]
    fn reports_unterminated_string_position() {
        let err = tokenize("a = 'oops").unwrap_err();
        assert_eq!(err.pos, 4);
    }
}
