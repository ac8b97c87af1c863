#pragma once

#include <array>
#include <string_view>

namespace ecgbench::data {

inline constexpr std::size_t kNumClasses = 19;

struct LabelInfo {
  int index;  // 1-based
  std::string_view name;
  std::string_view icd10;
};

/// The 19 pediatric cardiovascular disease classes, in label-index order.
inline constexpr std::array<LabelInfo, kNumClasses> kLabelSpace{{
    {1, "Fulminant myocarditis", "(F) I40.0"},
    {2, "Viral myocarditis", "(V) I40.0"},
    {3, "Acute myocarditis", "I40.9"},
    {4, "Myocarditis", "I51.4"},
    {5, "Dilated cardiomyopathy", "I42.0"},
    {6, "Hypertrophic cardiomyopathy", "I42.2"},
    {7, "Cardiomyopathy", "I42.9"},
    {8, "Noncompaction of ventricular myocardium", "Q24.8"},
    {9, "Kawasaki disease", "M30.3"},
    {10, "Ventricular septal defect", "Q21.0"},
    {11, "Atrial septal defect", "Q21.1"},
    {12, "ASD (Foramen ovale)", "(FO) Q21.1"},
    {13, "ASD (Ostium secundum defect)", "(OSD) Q21.1"},
    {14, "Atrioventricular septal defect", "Q21.2"},
    {15, "Tetralogy of Fallot", "Q21.3"},
    {16, "Stenosis of RV outflow tract", "Q22.1"},
    {17, "Patent ductus arteriosus", "Q25.0"},
    {18, "Stenosis of pulmonary artery", "Q25.6"},
    {19, "Pulmonary valve stenosis", "I37.0"},
}};

using LabelVector = std::array<unsigned char, kNumClasses>;

}  // namespace ecgbench::data
