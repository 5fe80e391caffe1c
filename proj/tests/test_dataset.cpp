#include <sstream>

#include <gtest/gtest.h>

#include "latentplan/dataset.hpp"

using namespace latentplan;

TEST(DatasetCsv, ReadsSequencesPhaseAndFrameRate) {
  std::istringstream in(
      "# frame_rate: 25\n"
      "seq,phase,vel_forward,vel_lateral,yaw_rate,j0\n"
      "a,0.0,1,0,0.1,0.5\n"
      "a,0.5,1,0,0.1,0.6\n"
      "b,1.0,2,0,0.2,0.7\n"
      "b,1.5,2,0,0.2,0.8\n");
  const MotionDataset d = read_dataset_csv(in);
  EXPECT_DOUBLE_EQ(d.frame_rate, 25.0);
  EXPECT_EQ(d.frames(), 4);
  EXPECT_EQ(d.channels(), 4);
  ASSERT_EQ(d.sequence_starts.size(), 2u);
  EXPECT_EQ(d.sequence_starts[1], 2);
  ASSERT_TRUE(d.phase.has_value());
  EXPECT_DOUBLE_EQ((*d.phase)(3), 1.5);
  const auto v = d.velocity_channels();
  ASSERT_TRUE(v.has_value());
  EXPECT_EQ(v->forward, 0);
  EXPECT_EQ(v->lateral, 1);
  EXPECT_EQ(v->yaw, 2);
}

TEST(DatasetCsv, BadNumberReportsLine) {
  std::istringstream in("seq,a,b\n0,1,2\n0,1,oops\n");
  try {
    read_dataset_csv(in);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidInput);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(DatasetCsv, WrongFieldCountReportsLine) {
  std::istringstream in("seq,a,b\n0,1,2\n0,1\n");
  EXPECT_THROW(read_dataset_csv(in), Error);
}

TEST(DatasetCsv, MissingSeqColumnRejected) {
  std::istringstream in("a,b\n1,2\n3,4\n");
  EXPECT_THROW(read_dataset_csv(in), Error);
}

TEST(DatasetCsv, SingleFrameSequenceRejected) {
  std::istringstream in("seq,a\n0,1\n0,2\n1,3\n");
  EXPECT_THROW(read_dataset_csv(in), Error);
}

TEST(DatasetCsv, RoundTripIsExact) {
  MotionDataset d;
  d.observations.resize(5, 3);
  d.observations << 0.1, 1.0 / 3.0, -2.5e-7, 4, 5, 6, 7, 8, 9, 1e300, -1e-300, 0.0, 3.14159, 2.71828, 1.41421;
  d.sequence_starts = {0, 3};
  d.phase = Eigen::VectorXd::LinSpaced(5, 0.0, 6.0);
  d.frame_rate = 30.0;
  d.channel_names = {"x", "y", "z"};
  std::stringstream ss;
  write_dataset_csv(ss, d);
  const MotionDataset r = read_dataset_csv(ss);
  EXPECT_EQ(r.observations, d.observations);
  EXPECT_EQ(r.sequence_starts, d.sequence_starts);
  EXPECT_EQ(*r.phase, *d.phase);
  EXPECT_EQ(r.channel_names, d.channel_names);
  EXPECT_EQ(r.frame_rate, d.frame_rate);
}

TEST(Dataset, ValidateRejectsBadStarts) {
  MotionDataset d;
  d.observations = Eigen::MatrixXd::Zero(4, 2);
  d.sequence_starts = {1};
  EXPECT_THROW(d.validate(), Error);
  d.sequence_starts = {0, 2, 2};
  EXPECT_THROW(d.validate(), Error);
  d.sequence_starts = {0, 2};
  EXPECT_NO_THROW(d.validate());
}
