use super::{ParseError, ParseErrorKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Tok {
    Iri,
    PName,
    Var,
    Literal { language_tag: bool, datatype: bool },
    Blank,
    Word,
    LBrace,
    RBrace,
    LParen,
    RParen,
    Dot,
    Semi,
    Comma,
    Star,
    Other(char),
    Eof,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Token {
    pub tok: Tok,
    pub start: usize,
    pub end: usize,
}

/// Replaces `#` comments with spaces, leaving byte offsets untouched.
pub(crate) fn strip_comments(text: &str) -> String {
    let bytes = text.as_bytes();
    let mut out = bytes.to_vec();
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'"' | b'\'' => i = skip_string(bytes, i).unwrap_or(bytes.len()),
            b'<' => i = iri_end(bytes, i).unwrap_or(i + 1),
            b'#' => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    out[i] = b' ';
                    i += 1;
                }
            }
            _ => i += 1,
        }
    }
    // Only ASCII bytes inside comments were touched, or whole multi-byte
    // sequences were blanked byte by byte, so the result is valid UTF-8.
    String::from_utf8(out).expect("comment stripping keeps UTF-8 valid")
}

/// End offset (exclusive) of an IRIREF starting at `start`, if the bytes
/// form one. Otherwise `<` is an operator.
pub(crate) fn iri_end(bytes: &[u8], start: usize) -> Option<usize> {
    let mut i = start + 1;
    while i < bytes.len() {
        match bytes[i] {
            b'>' => return Some(i + 1),
            b'<' | b'"' | b'{' | b'}' | b'|' | b'^' | b'`' | b'\\' => return None,
            c if c.is_ascii_whitespace() => return None,
            _ => i += 1,
        }
    }
    None
}

/// End offset (exclusive) of a quoted string starting at `start`.
pub(crate) fn skip_string(bytes: &[u8], start: usize) -> Option<usize> {
    let quote = bytes[start];
    let long = bytes.len() >= start + 3 && bytes[start + 1] == quote && bytes[start + 2] == quote;
    let mut i = if long { start + 3 } else { start + 1 };
    while i < bytes.len() {
        let c = bytes[i];
        if c == b'\\' {
            i += 2;
            continue;
        }
        if long {
            if c == quote && bytes.get(i + 1) == Some(&quote) && bytes.get(i + 2) == Some(&quote) {
                return Some(i + 3);
            }
        } else if c == quote {
            return Some(i + 1);
        } else if c == b'\n' || c == b'\r' {
            return None;
        }
        i += 1;
    }
    None
}

fn is_name_start(c: char) -> bool {
    c.is_alphabetic() || c == '_'
}

fn is_name_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '-'
}

pub(crate) struct Lexer<'a> {
    src: &'a str,
    original: &'a str,
    pub pos: usize,
}

impl<'a> Lexer<'a> {
    pub fn new(src: &'a str, original: &'a str) -> Self {
        Self {
            src,
            original,
            pos: 0,
        }
    }

    pub fn src(&self) -> &'a str {
        self.src
    }

    pub fn text(&self, token: Token) -> &'a str {
        &self.src[token.start..token.end]
    }

    pub fn error(
        &self,
        offset: usize,
        kind: ParseErrorKind,
        message: impl Into<String>,
    ) -> ParseError {
        ParseError::at(self.original, offset, kind, message)
    }

    pub fn skip_ws(&mut self) {
        let rest = &self.src[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn char_at(&self, i: usize) -> Option<char> {
        self.src.get(i..).and_then(|s| s.chars().next())
    }

    pub fn peek(&mut self) -> Result<Token, ParseError> {
        let saved = self.pos;
        let token = self.next();
        self.pos = saved;
        token
    }

    pub fn next(&mut self) -> Result<Token, ParseError> {
        self.skip_ws();
        let start = self.pos;
        let bytes = self.src.as_bytes();
        let Some(c) = self.char_at(start) else {
            return Ok(Token {
                tok: Tok::Eof,
                start,
                end: start,
            });
        };
        let single = |tok| Token {
            tok,
            start,
            end: start + 1,
        };
        let token = match c {
            '{' => single(Tok::LBrace),
            '}' => single(Tok::RBrace),
            '(' => single(Tok::LParen),
            ')' => single(Tok::RParen),
            ';' => single(Tok::Semi),
            ',' => single(Tok::Comma),
            '*' => single(Tok::Star),
            '.' if !self.char_at(start + 1).is_some_and(|d| d.is_ascii_digit()) => single(Tok::Dot),
            '<' => match iri_end(bytes, start) {
                Some(end) => Token {
                    tok: Tok::Iri,
                    start,
                    end,
                },
                None => single(Tok::Other('<')),
            },
            '?' | '$' => {
                let end = self.scan_while(start + 1, |c| c.is_alphanumeric() || c == '_');
                if end == start + 1 {
                    return Err(self.error(start, ParseErrorKind::Syntax, "empty variable name"));
                }
                Token {
                    tok: Tok::Var,
                    start,
                    end,
                }
            }
            '"' | '\'' => self.literal(start)?,
            '_' if self.char_at(start + 1) == Some(':') => {
                let end = self.local_name_end(start + 2);
                if end == start + 2 {
                    return Err(self.error(
                        start,
                        ParseErrorKind::Syntax,
                        "empty blank node label",
                    ));
                }
                Token {
                    tok: Tok::Blank,
                    start,
                    end,
                }
            }
            ':' => Token {
                tok: Tok::PName,
                start,
                end: self.local_name_end(start + 1),
            },
            c if c.is_ascii_digit()
                || c == '.'
                || ((c == '+' || c == '-') && self.number_follows(start + 1)) =>
            {
                self.number(start)
            }
            c if is_name_start(c) => {
                let end = self.scan_while(start, |c| is_name_char(c) || c == '.');
                // Trailing dots belong to the triple terminator.
                let mut word_end = end;
                while self.src[start..word_end].ends_with('.') {
                    word_end -= 1;
                }
                if self.char_at(word_end) == Some(':') {
                    Token {
                        tok: Tok::PName,
                        start,
                        end: self.local_name_end(word_end + 1),
                    }
                } else {
                    Token {
                        tok: Tok::Word,
                        start,
                        end: word_end,
                    }
                }
            }
            other => Token {
                tok: Tok::Other(other),
                start,
                end: start + other.len_utf8(),
            },
        };
        self.pos = token.end;
        Ok(token)
    }

    fn scan_while(&self, from: usize, pred: impl Fn(char) -> bool) -> usize {
        let rest = &self.src[from..];
        let len = rest
            .char_indices()
            .find(|&(_, c)| !pred(c))
            .map(|(i, _)| i)
            .unwrap_or(rest.len());
        from + len
    }

    /// Local part of a prefixed name or blank node label; may contain
    /// inner dots but never ends with one.
    fn local_name_end(&self, from: usize) -> usize {
        let mut end = self.scan_while(from, |c| {
            is_name_char(c) || c == '.' || c == ':' || c == '%'
        });
        while end > from && self.src[from..end].ends_with('.') {
            end -= 1;
        }
        end
    }

    fn number_follows(&self, at: usize) -> bool {
        match self.char_at(at) {
            Some(d) if d.is_ascii_digit() => true,
            Some('.') => self.char_at(at + 1).is_some_and(|d| d.is_ascii_digit()),
            _ => false,
        }
    }

    fn number(&self, start: usize) -> Token {
        let bytes = self.src.as_bytes();
        let mut i = start;
        if bytes[i] == b'+' || bytes[i] == b'-' {
            i += 1;
        }
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
        if i + 1 < bytes.len() && bytes[i] == b'.' && bytes[i + 1].is_ascii_digit() {
            i += 1;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
        }
        if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
            let mut j = i + 1;
            if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                j += 1;
            }
            if j < bytes.len() && bytes[j].is_ascii_digit() {
                while j < bytes.len() && bytes[j].is_ascii_digit() {
                    j += 1;
                }
                i = j;
            }
        }
        Token {
            tok: Tok::Literal {
                language_tag: false,
                datatype: false,
            },
            start,
            end: i,
        }
    }

    fn literal(&self, start: usize) -> Result<Token, ParseError> {
        let bytes = self.src.as_bytes();
        let mut end = skip_string(bytes, start).ok_or_else(|| {
            self.error(start, ParseErrorKind::Syntax, "unterminated string literal")
        })?;
        let mut language_tag = false;
        let mut datatype = false;
        if bytes.get(end) == Some(&b'@') {
            let tag_end = self.scan_while(end + 1, |c| c.is_ascii_alphanumeric() || c == '-');
            if tag_end == end + 1 {
                return Err(self.error(end, ParseErrorKind::Syntax, "empty language tag"));
            }
            language_tag = true;
            end = tag_end;
        } else if self.src[end..].starts_with("^^") {
            let dt_start = end + 2;
            let dt_end = if bytes.get(dt_start) == Some(&b'<') {
                iri_end(bytes, dt_start)
            } else {
                let mut sub = Lexer::new(self.src, self.original);
                sub.pos = dt_start;
                match sub.next() {
                    Ok(t) if t.tok == Tok::PName && t.start == dt_start => Some(t.end),
                    _ => None,
                }
            };
            end = dt_end.ok_or_else(|| {
                self.error(
                    dt_start,
                    ParseErrorKind::Syntax,
                    "malformed literal datatype",
                )
            })?;
            datatype = true;
        }
        Ok(Token {
            tok: Tok::Literal {
                language_tag,
                datatype,
            },
            start,
            end,
        })
    }

    /// Captures a parenthesised expression starting at the current
    /// position (after whitespace), honouring nested parentheses and
    /// string literals. Returns the byte range.
    pub fn balanced_parens(&mut self) -> Result<(usize, usize), ParseError> {
        self.skip_ws();
        let start = self.pos;
        let bytes = self.src.as_bytes();
        if bytes.get(start) != Some(&b'(') {
            return Err(self.error(start, ParseErrorKind::Syntax, "expected '('"));
        }
        let mut depth = 0usize;
        let mut i = start;
        while i < bytes.len() {
            match bytes[i] {
                b'(' => depth += 1,
                b')' => {
                    depth -= 1;
                    if depth == 0 {
                        self.pos = i + 1;
                        return Ok((start, i + 1));
                    }
                }
                b'"' | b'\'' => {
                    i = skip_string(bytes, i).ok_or_else(|| {
                        self.error(i, ParseErrorKind::Syntax, "unterminated string literal")
                    })?;
                    continue;
                }
                b'{' | b'}' => {
                    return Err(self.error(i, ParseErrorKind::Syntax, "unbalanced parentheses"));
                }
                _ => {}
            }
            i += 1;
        }
        Err(self.error(start, ParseErrorKind::Syntax, "unbalanced parentheses"))
    }

    /// Scans the SELECT projection: everything up to `WHERE` or `{` at
    /// parenthesis depth zero. Leaves the cursor on the terminator.
    pub fn projection_end(&mut self) -> Result<usize, ParseError> {
        let bytes = self.src.as_bytes();
        let start = self.pos;
        let mut depth = 0i64;
        let mut i = start;
        while i < bytes.len() {
            match bytes[i] {
                b'(' => depth += 1,
                b')' => depth -= 1,
                b'"' | b'\'' => {
                    i = skip_string(bytes, i).ok_or_else(|| {
                        self.error(i, ParseErrorKind::Syntax, "unterminated string literal")
                    })?;
                    continue;
                }
                b'{' if depth == 0 => {
                    self.pos = i;
                    return Ok(i);
                }
                b'}' => {
                    return Err(self.error(
                        i,
                        ParseErrorKind::Syntax,
                        "unexpected '}' in projection",
                    ))
                }
                b'W' | b'w' if depth == 0 => {
                    let boundary_before = i == 0
                        || !is_name_char(self.src[..i].chars().next_back().unwrap_or(' '))
                            && !matches!(bytes[i - 1], b'?' | b'$' | b':');
                    let word = self.src.get(i..i + 5);
                    let boundary_after = self
                        .char_at(i + 5)
                        .is_none_or(|c| !is_name_char(c) && c != ':');
                    if boundary_before
                        && boundary_after
                        && word.is_some_and(|w| w.eq_ignore_ascii_case("where"))
                    {
                        self.pos = i;
                        return Ok(i);
                    }
                }
                _ => {}
            }
            i += 1;
        }
        Err(self.error(
            start,
            ParseErrorKind::Syntax,
            "expected WHERE or '{' after projection",
        ))
    }
}
