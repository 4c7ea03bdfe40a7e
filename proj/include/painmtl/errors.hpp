#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace painmtl {

// Base class for every error raised by the library. Callers that only care
// about "something in the pipeline failed" catch this.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define PAINMTL_DEFINE_ERROR(Name) \
  class Name : public Error {      \
   public:                         \
    using Error::Error;            \
  }

// signal
PAINMTL_DEFINE_ERROR(InvalidSignal);
PAINMTL_DEFINE_ERROR(BandEdgeError);
PAINMTL_DEFINE_ERROR(SignalTooShort);
PAINMTL_DEFINE_ERROR(NoBeatsDetected);
PAINMTL_DEFINE_ERROR(TooFewBeats);

// features
PAINMTL_DEFINE_ERROR(WindowTooShort);
PAINMTL_DEFINE_ERROR(TooFewIntervals);
PAINMTL_DEFINE_ERROR(EmptyTrainingSet);
PAINMTL_DEFINE_ERROR(DimensionMismatch);

// data
PAINMTL_DEFINE_ERROR(SchemaError);
PAINMTL_DEFINE_ERROR(LabelError);
PAINMTL_DEFINE_ERROR(ConfigError);
PAINMTL_DEFINE_ERROR(TooFewSamples);

// nn / baselines
PAINMTL_DEFINE_ERROR(UnknownTask);
PAINMTL_DEFINE_ERROR(EmptyTask);
PAINMTL_DEFINE_ERROR(SingleClassData);
PAINMTL_DEFINE_ERROR(ModelFormatError);

#undef PAINMTL_DEFINE_ERROR

class ParseError : public Error {
 public:
  ParseError(std::size_t row, const std::string& what) : Error("row " + std::to_string(row) + ": " + what), row_(row) {}
  std::size_t row() const { return row_; }

 private:
  std::size_t row_;
};

// An error raised inside one cross-validation fold, annotated with its index.
class FoldError : public Error {
 public:
  FoldError(std::size_t fold, const std::string& what)
      : Error("fold " + std::to_string(fold) + ": " + what), fold_(fold) {}
  std::size_t fold() const { return fold_; }

 private:
  std::size_t fold_;
};

class NonFiniteLoss : public Error {
 public:
  explicit NonFiniteLoss(std::size_t epoch)
      : Error("loss became non-finite at epoch " + std::to_string(epoch)), epoch_(epoch) {}
  std::size_t epoch() const { return epoch_; }

 private:
  std::size_t epoch_;
};

}  // namespace painmtl
