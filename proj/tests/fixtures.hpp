#pragma once

#include <string_view>

namespace matra::testing {

// English-Hindi NEWS file covering: a plain pair, two TargetNames for one
// source, a multi-word source against a single-word target, an equal-count
// multi-word pair, and a lower-case source.
inline constexpr std::string_view kNewsEnHi = R"(<?xml version="1.0" encoding="UTF-8"?>
<TransliterationCorpus CorpusID="fixture" SourceLang="English" TargetLang="Hindi" CorpusType="Train" CorpusSize="5" CorpusFormat="UTF8">
  <Name ID="1">
    <SourceName>LEAGUE</SourceName>
    <TargetName ID="1">लीग</TargetName>
  </Name>
  <Name ID="2">
    <SourceName>AARTI</SourceName>
    <TargetName ID="1">आरती</TargetName>
    <TargetName ID="2">आरथी</TargetName>
  </Name>
  <Name ID="3">
    <SourceName>NEW DELHI</SourceName>
    <TargetName ID="1">नईदिल्ली</TargetName>
  </Name>
  <Name ID="4">
    <SourceName>RAM KUMAR</SourceName>
    <TargetName ID="1">राम कुमार</TargetName>
  </Name>
  <Name ID="5">
    <SourceName>Rahul</SourceName>
    <TargetName ID="1">राहुल</TargetName>
  </Name>
</TransliterationCorpus>
)";

/// Hand-enumerated TSV of kNewsEnHi after cleaning, tagging and merging.
inline constexpr std::string_view kNewsEnHiMergedTsv =
    "LEAGUE\tलीग\t<hindi>\t<english>\n"
    "AARTI\tआरती\t<hindi>\t<english>\n"
    "AARTI\tआरथी\t<hindi>\t<english>\n"
    "RAM\tराम\t<hindi>\t<english>\n"
    "KUMAR\tकुमार\t<hindi>\t<english>\n"
    "RAHUL\tराहुल\t<hindi>\t<english>\n"
    "लीग\tLEAGUE\t<english>\t<hindi>\n"
    "आरती\tAARTI\t<english>\t<hindi>\n"
    "आरथी\tAARTI\t<english>\t<hindi>\n"
    "राम\tRAM\t<english>\t<hindi>\n"
    "कुमार\tKUMAR\t<english>\t<hindi>\n"
    "राहुल\tRAHUL\t<english>\t<hindi>\n";

// Three single-target names.
inline constexpr std::string_view kNewsEnTaSmall = R"(<?xml version="1.0" encoding="UTF-8"?>
<TransliterationCorpus CorpusID="small" SourceLang="English" TargetLang="Tamil">
  <Name ID="1"><SourceName>RAMA</SourceName><TargetName ID="1">ராமா</TargetName></Name>
  <Name ID="2"><SourceName>KALA</SourceName><TargetName ID="1">கலா</TargetName></Name>
  <Name ID="3"><SourceName>MALA</SourceName><TargetName ID="1">மாலா</TargetName></Name>
</TransliterationCorpus>
)";

}  // namespace matra::testing
