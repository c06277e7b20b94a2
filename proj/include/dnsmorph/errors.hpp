#pragma once

#include <stdexcept>
#include <string>

namespace dnsmorph {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CharacterOutOfAlphabet : public Error {
 public:
  using Error::Error;
};

class BadPaddingStructure : public Error {
 public:
  using Error::Error;
};

class EmptyInput : public Error {
 public:
  using Error::Error;
};

class LabelTooLong : public Error {
 public:
  using Error::Error;
};

class NameTooLong : public Error {
 public:
  using Error::Error;
};

class TruncatedMessage : public Error {
 public:
  using Error::Error;
};

class WindowFull : public Error {
 public:
  using Error::Error;
};

class NonPositiveSample : public Error {
 public:
  using Error::Error;
};

class EmptyCorpus : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class BindFailure : public Error {
 public:
  using Error::Error;
};

class HandoverTimeout : public Error {
 public:
  using Error::Error;
};

class CryptoFailure : public Error {
 public:
  using Error::Error;
};

}  // namespace dnsmorph
