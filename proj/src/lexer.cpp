#include <array>
#include <charconv>
#include <string>

#include "miniomp/frontend.hpp"

namespace miniomp {

std::string_view to_string(TokenKind kind) {
  switch (kind) {
    case TokenKind::Identifier: return "identifier";
    case TokenKind::IntLiteral: return "integer-literal";
    case TokenKind::FloatLiteral: return "float-literal";
    case TokenKind::StringLiteral: return "string-literal";
    case TokenKind::Keyword: return "keyword";
    case TokenKind::Operator: return "operator";
    case TokenKind::Punctuation: return "punctuation";
    case TokenKind::DirectiveComment: return "directive-comment";
    case TokenKind::EndOfFile: return "end-of-file";
  }
  return "?";
}

namespace {

constexpr std::array<std::string_view, 16> kKeywords = {
    "fn",    "var",  "if",     "else",  "while", "for", "in",    "step",
    "return", "print", "true", "false", "extern", "int", "float", "bool"};

// Longest first so that "..", "->", "==" win over their prefixes.
constexpr std::array<std::string_view, 17> kOperators = {
    "..", "->", "==", "!=", "<=", ">=", "&&", "||", "+", "-", "*", "/", "%", "=", "<", ">", "!"};

constexpr std::string_view kPunctuation = "(){}[],;:";

bool is_ident_start(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
}
bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_ident_char(char c) { return is_ident_start(c) || is_digit(c); }

class Lexer {
public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    while (true) {
      skip_whitespace();
      if (at_end()) break;
      lex_one();
    }
    tokens_.push_back(Token{TokenKind::EndOfFile, "", line_, column_, pos_});
    return std::move(tokens_);
  }

private:
  bool at_end() const { return pos_ >= src_.size(); }
  char peek(std::size_t ahead = 0) const {
    return pos_ + ahead < src_.size() ? src_[pos_ + ahead] : '\0';
  }

  void advance() {
    char c = src_[pos_++];
    if (c == '\n') {
      ++line_;
      column_ = 1;
      line_has_token_ = false;
    } else if ((static_cast<unsigned char>(c) & 0xC0) != 0x80) {
      ++column_;
    }
  }

  [[noreturn]] void fail(const std::string& message, int line, int column) const {
    throw CompileError(Diagnostic{DiagnosticKind::LexError, {line, column}, message, ""});
  }

  // "//#omp" followed by whitespace or the end of the line.
  bool at_sentinel() const {
    if (!src_.substr(pos_).starts_with(kDirectiveSentinel)) return false;
    const std::size_t after = pos_ + kDirectiveSentinel.size();
    return after >= src_.size() || src_[after] == ' ' || src_[after] == '\t' || src_[after] == '\r' ||
           src_[after] == '\n';
  }

  void skip_whitespace() {
    while (!at_end()) {
      char c = peek();
      if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
        advance();
      } else if (c == '/' && peek(1) == '/') {
        if (at_sentinel()) return;
        while (!at_end() && peek() != '\n') advance();
      } else {
        return;
      }
    }
  }

  void emit(TokenKind kind, std::size_t start, int line, int column) {
    tokens_.push_back(Token{kind, std::string(src_.substr(start, pos_ - start)), line, column, start});
    line_has_token_ = true;
  }

  void lex_one() {
    const std::size_t start = pos_;
    const int line = line_;
    const int column = column_;
    const char c = peek();

    if (c == '/' && peek(1) == '/') {
      // Only directive comments reach here.
      if (line_has_token_) fail("directive comment must be on its own line", line, column);
      while (!at_end() && peek() != '\n') advance();
      std::size_t end = pos_;
      if (end > start && src_[end - 1] == '\r') --end;
      tokens_.push_back(Token{TokenKind::DirectiveComment, std::string(src_.substr(start, end - start)),
                              line, column, start});
      line_has_token_ = true;
      return;
    }
    if (is_ident_start(c)) {
      while (is_ident_char(peek())) advance();
      std::string_view word = src_.substr(start, pos_ - start);
      bool keyword = false;
      for (auto k : kKeywords) keyword = keyword || k == word;
      emit(keyword ? TokenKind::Keyword : TokenKind::Identifier, start, line, column);
      return;
    }
    if (is_digit(c)) {
      lex_number(start, line, column);
      return;
    }
    if (c == '"') {
      lex_string(start, line, column);
      return;
    }
    for (auto op : kOperators) {
      if (src_.substr(pos_).starts_with(op)) {
        for (std::size_t i = 0; i < op.size(); ++i) advance();
        emit(TokenKind::Operator, start, line, column);
        return;
      }
    }
    if (kPunctuation.find(c) != std::string_view::npos) {
      advance();
      emit(TokenKind::Punctuation, start, line, column);
      return;
    }
    if ((static_cast<unsigned char>(c) & 0x80) != 0) {
      fail("illegal non-ASCII character outside a comment or string", line, column);
    }
    fail(std::string("illegal character '") + c + "'", line, column);
  }

  void lex_number(std::size_t start, int line, int column) {
    bool is_float = false;
    while (is_digit(peek())) advance();
    if (peek() == '.' && is_digit(peek(1))) {
      is_float = true;
      advance();
      while (is_digit(peek())) advance();
    }
    if (peek() == 'e' || peek() == 'E') {
      std::size_t ahead = 1;
      if (peek(1) == '+' || peek(1) == '-') ahead = 2;
      if (!is_digit(peek(ahead))) fail("malformed exponent in numeric literal", line, column);
      is_float = true;
      for (std::size_t i = 0; i < ahead; ++i) advance();
      while (is_digit(peek())) advance();
    }
    if (is_ident_char(peek())) fail("invalid character in numeric literal", line_, column_);
    std::string_view text = src_.substr(start, pos_ - start);
    if (is_float) {
      double v = 0;
      auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
      if (ec != std::errc{} || p != text.data() + text.size()) {
        fail("float literal out of range", line, column);
      }
      emit(TokenKind::FloatLiteral, start, line, column);
    } else {
      std::int64_t v = 0;
      auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
      if (ec != std::errc{} || p != text.data() + text.size()) {
        fail("integer literal out of range", line, column);
      }
      emit(TokenKind::IntLiteral, start, line, column);
    }
  }

  void lex_string(std::size_t start, int line, int column) {
    advance();  // opening quote
    while (true) {
      if (at_end() || peek() == '\n') fail("unterminated string literal", line, column);
      char c = peek();
      if (c == '"') {
        advance();
        break;
      }
      if (c == '\\') {
        char e = peek(1);
        if (e != 'n' && e != 't' && e != '\\' && e != '"') {
          fail("unknown escape sequence in string literal", line_, column_);
        }
        advance();
      }
      advance();
    }
    emit(TokenKind::StringLiteral, start, line, column);
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int column_ = 1;
  bool line_has_token_ = false;
  std::vector<Token> tokens_;
};

}  // namespace

std::vector<Token> tokenize(std::string_view source) { return Lexer(source).run(); }

}  // namespace miniomp
