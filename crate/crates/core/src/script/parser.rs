use super::{Arg, Command, ScriptProgram, Span, SyntaxError, Value};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Str(String),
    Int(i64),
    Real(f64),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Colon,
    Semi,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Str(_) => "string".into(),
            Tok::Int(_) | Tok::Real(_) => "number".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

struct Lexer<'a> {
    src: &'a str,
    chars: Vec<char>,
    pos: usize,
    line: usize,
    column: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Self {
            src,
            chars: src.chars().collect(),
            pos: 0,
            line: 1,
            column: 1,
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn span(&self) -> Span {
        Span {
            line: self.line,
            column: self.column,
        }
    }

    fn error(&self, span: Span, message: impl Into<String>) -> SyntaxError {
        syntax_error(self.src, span, message)
    }

    fn skip_trivia(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.bump();
            } else if c == '#' {
                while let Some(c) = self.peek() {
                    if c == '\n' {
                        break;
                    }
                    self.bump();
                }
            } else {
                break;
            }
        }
    }

    fn next(&mut self) -> Result<(Tok, Span), SyntaxError> {
        self.skip_trivia();
        let span = self.span();
        let Some(c) = self.peek() else {
            return Ok((Tok::Eof, span));
        };
        let single = match c {
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '[' => Some(Tok::LBracket),
            ']' => Some(Tok::RBracket),
            ',' => Some(Tok::Comma),
            ':' => Some(Tok::Colon),
            ';' => Some(Tok::Semi),
            _ => None,
        };
        if let Some(tok) = single {
            self.bump();
            return Ok((tok, span));
        }
        if c == '"' {
            return self.string(span).map(|s| (Tok::Str(s), span));
        }
        if c.is_ascii_digit() || c == '-' || c == '+' {
            return self.number(span).map(|t| (t, span));
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let mut ident = String::new();
            while let Some(c) = self
                .peek()
                .filter(|c| c.is_ascii_alphanumeric() || *c == '_')
            {
                ident.push(c);
                self.bump();
            }
            return Ok((Tok::Ident(ident), span));
        }
        Err(self.error(span, format!("unexpected character `{c}`")))
    }

    fn string(&mut self, start: Span) -> Result<String, SyntaxError> {
        self.bump();
        let mut out = String::new();
        loop {
            let here = self.span();
            match self.bump() {
                None => return Err(self.error(start, "unterminated string")),
                Some('"') => return Ok(out),
                Some('\\') => match self.bump() {
                    Some('"') => out.push('"'),
                    Some('\\') => out.push('\\'),
                    Some('n') => out.push('\n'),
                    Some('t') => out.push('\t'),
                    Some('r') => out.push('\r'),
                    Some(other) => {
                        return Err(self.error(here, format!("unknown escape `\\{other}`")))
                    }
                    None => return Err(self.error(start, "unterminated string")),
                },
                Some(c) => out.push(c),
            }
        }
    }

    fn number(&mut self, start: Span) -> Result<Tok, SyntaxError> {
        let mut text = String::new();
        if let Some(sign) = self.peek().filter(|c| *c == '-' || *c == '+') {
            text.push(sign);
            self.bump();
        }
        let digits = |lx: &mut Self, text: &mut String| {
            let mut n = 0;
            while let Some(d) = lx.peek().filter(char::is_ascii_digit) {
                text.push(d);
                lx.bump();
                n += 1;
            }
            n
        };
        if digits(self, &mut text) == 0 {
            return Err(self.error(start, "expected digits"));
        }
        let mut real = false;
        if self.peek() == Some('.') {
            real = true;
            text.push('.');
            self.bump();
            if digits(self, &mut text) == 0 {
                return Err(self.error(self.span(), "expected digits after decimal point"));
            }
        }
        if let Some(e) = self.peek().filter(|c| *c == 'e' || *c == 'E') {
            real = true;
            text.push(e);
            self.bump();
            if let Some(sign) = self.peek().filter(|c| *c == '-' || *c == '+') {
                text.push(sign);
                self.bump();
            }
            if digits(self, &mut text) == 0 {
                return Err(self.error(self.span(), "expected exponent digits"));
            }
        }
        if real {
            text.parse()
                .map(Tok::Real)
                .map_err(|_| self.error(start, format!("invalid number `{text}`")))
        } else {
            text.parse()
                .map(Tok::Int)
                .map_err(|_| self.error(start, format!("integer `{text}` out of range")))
        }
    }
}

fn syntax_error(src: &str, span: Span, message: impl Into<String>) -> SyntaxError {
    SyntaxError {
        span,
        message: message.into(),
        excerpt: src.lines().nth(span.line - 1).unwrap_or("").to_owned(),
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    tok: Tok,
    span: Span,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Result<Self, SyntaxError> {
        let mut lexer = Lexer::new(src);
        let (tok, span) = lexer.next()?;
        Ok(Self { lexer, tok, span })
    }

    fn advance(&mut self) -> Result<(Tok, Span), SyntaxError> {
        let (tok, span) = self.lexer.next()?;
        Ok((
            std::mem::replace(&mut self.tok, tok),
            std::mem::replace(&mut self.span, span),
        ))
    }

    fn expect(&mut self, want: Tok) -> Result<Span, SyntaxError> {
        if self.tok == want {
            Ok(self.advance()?.1)
        } else {
            Err(self.unexpected(&format!("expected {}", want.describe())))
        }
    }

    fn unexpected(&self, what: &str) -> SyntaxError {
        self.lexer
            .error(self.span, format!("{what}, found {}", self.tok.describe()))
    }

    fn ident(&mut self, what: &str) -> Result<(String, Span), SyntaxError> {
        match &self.tok {
            Tok::Ident(_) => match self.advance()? {
                (Tok::Ident(s), span) => Ok((s, span)),
                _ => unreachable!(),
            },
            _ => Err(self.unexpected(&format!("expected {what}"))),
        }
    }

    fn program(&mut self) -> Result<Vec<Command>, SyntaxError> {
        let mut commands = Vec::new();
        loop {
            match self.tok {
                Tok::Eof => return Ok(commands),
                Tok::Semi => {
                    self.advance()?;
                }
                _ => commands.push(self.command()?),
            }
        }
    }

    fn command(&mut self) -> Result<Command, SyntaxError> {
        let (name, span) = self.ident("a command name")?;
        self.expect(Tok::LParen)?;
        let mut args: Vec<Arg> = Vec::new();
        if self.tok != Tok::RParen {
            loop {
                let (key, key_span) = self.ident("an argument name")?;
                if args.iter().any(|a| a.key == key) {
                    return Err(self
                        .lexer
                        .error(key_span, format!("duplicate argument `{key}`")));
                }
                self.expect(Tok::Colon)?;
                let value = self.value()?;
                args.push(Arg {
                    key,
                    value,
                    span: key_span,
                });
                if self.tok == Tok::Comma {
                    self.advance()?;
                } else {
                    break;
                }
            }
        }
        if self.tok != Tok::RParen {
            return Err(self.unexpected("expected `,` or `)`"));
        }
        self.advance()?;
        Ok(Command { name, args, span })
    }

    fn value(&mut self) -> Result<Value, SyntaxError> {
        match &self.tok {
            Tok::Str(_) | Tok::Int(_) | Tok::Real(_) => match self.advance()?.0 {
                Tok::Str(s) => Ok(Value::Str(s)),
                Tok::Int(i) => Ok(Value::Int(i)),
                Tok::Real(x) => Ok(Value::Real(x)),
                _ => unreachable!(),
            },
            Tok::Ident(s) if s == "true" || s == "false" => {
                let b = s == "true";
                self.advance()?;
                Ok(Value::Bool(b))
            }
            Tok::LBracket => {
                self.advance()?;
                let mut items = vec![self.value()?];
                while self.tok == Tok::Comma {
                    self.advance()?;
                    items.push(self.value()?);
                }
                if self.tok != Tok::RBracket {
                    return Err(self.unexpected("expected `,` or `]`"));
                }
                self.advance()?;
                Ok(Value::List(items))
            }
            _ => Err(self.unexpected("expected a value")),
        }
    }
}

/// Parses a script into commands with their source positions.
pub fn parse_script(source: &str) -> Result<ScriptProgram, SyntaxError> {
    let mut parser = Parser::new(source)?;
    let commands = parser.program()?;
    Ok(ScriptProgram {
        commands,
        source: source.to_owned(),
    })
}
