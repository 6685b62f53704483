use std::fmt;

use super::{Location, ParseError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    Ident(String),
    Int(i64),
    /// Raw literal text including the surrounding quotes, escapes untouched.
    Str(String),
    Keyword(Keyword),
    /// A C keyword that is outside the accepted subset.
    Unsupported(String),
    Punct(Punct),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Keyword {
    Int,
    Void,
    Extern,
    If,
    Else,
    While,
    For,
    Return,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Punct {
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Semi,
    Comma,
    Assign,
    Plus,
    Minus,
    Star,
    Slash,
    Percent,
    EqEq,
    NotEq,
    Lt,
    Le,
    Gt,
    Ge,
    AndAnd,
    OrOr,
    Bang,
}

impl Punct {
    pub fn as_str(self) -> &'static str {
        match self {
            Punct::LParen => "(",
            Punct::RParen => ")",
            Punct::LBrace => "{",
            Punct::RBrace => "}",
            Punct::LBracket => "[",
            Punct::RBracket => "]",
            Punct::Semi => ";",
            Punct::Comma => ",",
            Punct::Assign => "=",
            Punct::Plus => "+",
            Punct::Minus => "-",
            Punct::Star => "*",
            Punct::Slash => "/",
            Punct::Percent => "%",
            Punct::EqEq => "==",
            Punct::NotEq => "!=",
            Punct::Lt => "<",
            Punct::Le => "<=",
            Punct::Gt => ">",
            Punct::Ge => ">=",
            Punct::AndAnd => "&&",
            Punct::OrOr => "||",
            Punct::Bang => "!",
        }
    }
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenKind::Ident(s) | TokenKind::Unsupported(s) | TokenKind::Str(s) => {
                write!(f, "`{s}`")
            }
            TokenKind::Int(v) => write!(f, "`{v}`"),
            TokenKind::Keyword(k) => write!(f, "`{}`", keyword_text(*k)),
            TokenKind::Punct(p) => write!(f, "`{}`", p.as_str()),
        }
    }
}

pub fn keyword_text(k: Keyword) -> &'static str {
    match k {
        Keyword::Int => "int",
        Keyword::Void => "void",
        Keyword::Extern => "extern",
        Keyword::If => "if",
        Keyword::Else => "else",
        Keyword::While => "while",
        Keyword::For => "for",
        Keyword::Return => "return",
    }
}

const UNSUPPORTED: &[&str] = &[
    "auto", "break", "case", "char", "const", "continue", "default", "do", "double", "enum",
    "float", "goto", "long", "register", "short", "signed", "sizeof", "static", "struct",
    "switch", "typedef", "union", "unsigned", "volatile",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub start: Location,
    pub end: Location,
}

/// Splits source text into tokens. Comments and whitespace are dropped;
/// preprocessor lines are rejected.
pub fn tokenize(text: &str) -> Result<Vec<Token>, ParseError> {
    Lexer::new(text).run()
}

struct Lexer {
    chars: Vec<char>,
    pos: usize,
    line: u32,
    col: u32,
}

impl Lexer {
    fn new(src: &str) -> Self {
        Lexer {
            chars: src.chars().collect(),
            pos: 0,
            line: 1,
            col: 1,
        }
    }

    fn loc(&self) -> Location {
        Location {
            line: self.line,
            column: self.col,
        }
    }

    fn peek(&self, off: usize) -> Option<char> {
        self.chars.get(self.pos + off).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.get(self.pos).copied()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn error(&self, at: Location, message: impl Into<String>) -> ParseError {
        ParseError {
            location: at,
            message: message.into(),
        }
    }

    fn run(mut self) -> Result<Vec<Token>, ParseError> {
        let mut out = Vec::new();
        while let Some(c) = self.peek(0) {
            if c.is_whitespace() {
                self.bump();
                continue;
            }
            let start = self.loc();
            if c == '/' && self.peek(1) == Some('/') {
                while let Some(c) = self.peek(0) {
                    if c == '\n' {
                        break;
                    }
                    self.bump();
                }
                continue;
            }
            if c == '/' && self.peek(1) == Some('*') {
                self.bump();
                self.bump();
                loop {
                    match self.peek(0) {
                        None => return Err(self.error(start, "unterminated comment")),
                        Some('*') if self.peek(1) == Some('/') => {
                            self.bump();
                            self.bump();
                            break;
                        }
                        Some(_) => {
                            self.bump();
                        }
                    }
                }
                continue;
            }
            if c == '#' {
                return Err(self.error(start, "preprocessor directives are not supported"));
            }
            let kind = if c.is_ascii_alphabetic() || c == '_' {
                let mut word = String::new();
                while let Some(c) = self.peek(0) {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        word.push(c);
                        self.bump();
                    } else {
                        break;
                    }
                }
                classify_word(word)
            } else if c.is_ascii_digit() {
                let mut digits = String::new();
                while let Some(c) = self.peek(0) {
                    if c.is_ascii_alphanumeric() {
                        digits.push(c);
                        self.bump();
                    } else {
                        break;
                    }
                }
                match digits.parse::<i64>() {
                    Ok(v) => TokenKind::Int(v),
                    Err(_) => {
                        return Err(self.error(start, format!("invalid integer literal `{digits}`")))
                    }
                }
            } else if c == '"' {
                let mut raw = String::from('"');
                self.bump();
                loop {
                    match self.bump() {
                        None | Some('\n') => {
                            return Err(self.error(start, "unterminated string literal"))
                        }
                        Some('\\') => {
                            raw.push('\\');
                            match self.bump() {
                                Some(e) if e != '\n' => raw.push(e),
                                _ => {
                                    return Err(self.error(start, "unterminated string literal"))
                                }
                            }
                        }
                        Some('"') => {
                            raw.push('"');
                            break;
                        }
                        Some(other) => raw.push(other),
                    }
                }
                TokenKind::Str(raw)
            } else {
                TokenKind::Punct(self.punct(start)?)
            };
            out.push(Token {
                kind,
                start,
                end: self.loc(),
            });
        }
        Ok(out)
    }

    fn punct(&mut self, start: Location) -> Result<Punct, ParseError> {
        let c = self.bump().expect("caller peeked a character");
        let next = self.peek(0);
        let two = |lexer: &mut Self, p: Punct| {
            lexer.bump();
            p
        };
        Ok(match (c, next) {
            ('=', Some('=')) => two(self, Punct::EqEq),
            ('!', Some('=')) => two(self, Punct::NotEq),
            ('<', Some('=')) => two(self, Punct::Le),
            ('>', Some('=')) => two(self, Punct::Ge),
            ('&', Some('&')) => two(self, Punct::AndAnd),
            ('|', Some('|')) => two(self, Punct::OrOr),
            ('(', _) => Punct::LParen,
            (')', _) => Punct::RParen,
            ('{', _) => Punct::LBrace,
            ('}', _) => Punct::RBrace,
            ('[', _) => Punct::LBracket,
            (']', _) => Punct::RBracket,
            (';', _) => Punct::Semi,
            (',', _) => Punct::Comma,
            ('=', _) => Punct::Assign,
            ('+', _) => Punct::Plus,
            ('-', _) => Punct::Minus,
            ('*', _) => Punct::Star,
            ('/', _) => Punct::Slash,
            ('%', _) => Punct::Percent,
            ('<', _) => Punct::Lt,
            ('>', _) => Punct::Gt,
            ('!', _) => Punct::Bang,
            (other, _) => {
                return Err(self.error(start, format!("unexpected character `{other}`")));
            }
        })
    }
}

fn classify_word(word: String) -> TokenKind {
    let kw = match word.as_str() {
        "int" => Some(Keyword::Int),
        "void" => Some(Keyword::Void),
        "extern" => Some(Keyword::Extern),
        "if" => Some(Keyword::If),
        "else" => Some(Keyword::Else),
        "while" => Some(Keyword::While),
        "for" => Some(Keyword::For),
        "return" => Some(Keyword::Return),
        _ => None,
    };
    match kw {
        Some(k) => TokenKind::Keyword(k),
        None if UNSUPPORTED.contains(&word.as_str()) => TokenKind::Unsupported(word),
        None => TokenKind::Ident(word),
    }
}
