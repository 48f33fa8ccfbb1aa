#include <gtest/gtest.h>

#include <sstream>

#include "ncc/io.hpp"

using namespace ncc;

TEST(DatasetCsv, RoundTripIsExact) {
  TrialConfig c;
  TrendSpec t;
  t.pattern = TrendPattern::seasonal;
  t.lambda.assign(5, 0.3);
  const auto data = generate_trial(c, t, 77);
  std::stringstream ss;
  write_dataset_csv(ss, data.records);
  const auto back = read_dataset_csv(ss);
  ASSERT_EQ(back.size(), data.records.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].j, data.records[i].j);
    EXPECT_EQ(back[i].arm, data.records[i].arm);
    EXPECT_EQ(back[i].time, data.records[i].time);
    EXPECT_EQ(back[i].response, data.records[i].response);
  }
}

TEST(DatasetCsv, ColumnOrderAndWhitespaceTolerated) {
  std::istringstream in("response, time ,arm,j\r\n1.5,10,0,1\n\n-2,12.5,1,2\n");
  const auto r = read_dataset_csv(in);
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[1].arm, 1);
  EXPECT_EQ(r[1].time, 12.5);
  EXPECT_EQ(r[1].response, -2.0);
}

TEST(DatasetCsv, MissingColumnNamed) {
  std::istringstream in("j,arm,response\n1,0,1.0\n");
  try {
    read_dataset_csv(in);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("missing column 'time'"), std::string::npos);
  }
}

TEST(DatasetCsv, NonNumericFieldReportsLine) {
  std::istringstream in("j,arm,time,response\n1,0,1,0.5\n2,one,2,0.1\n");
  try {
    read_dataset_csv(in);
    FAIL();
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("line 3"), std::string::npos);
    EXPECT_NE(msg.find("'arm'"), std::string::npos);
  }
}

TEST(DatasetCsv, RaggedRowRejected) {
  std::istringstream in("j,arm,time,response\n1,0,1\n");
  EXPECT_THROW(read_dataset_csv(in), DataError);
}

TEST(DatasetCsv, EmptyInputRejected) {
  std::istringstream in("");
  EXPECT_THROW(read_dataset_csv(in), DataError);
  EXPECT_THROW(read_dataset_csv(std::string("/nonexistent/file.csv")), DataError);
}

TEST(FormatDouble, ShortestRoundTrip) {
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(1528), "1528");
  const double x = 1.0 / 3.0;
  EXPECT_EQ(std::stod(format_double(x)), x);
}
